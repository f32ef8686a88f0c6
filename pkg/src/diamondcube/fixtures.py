"""Small reference cubes used throughout the tests and demos."""

from __future__ import annotations

import numpy as np

from .cube import Cube, cube_from_matrix, ingest_facts

PRODUCTS = ("TV", "Camcorder", "Phone", "Camera", "Game console", "DVD Player")
STORES = ("Chicago", "Montreal", "Miami", "Paris", "Berlin")

# sales in millions, rows follow PRODUCTS, columns follow STORES
SALES = (
    (3.4, 0.9, 0.1, 0.9, 2.0),
    (0.1, 1.4, 3.1, 2.3, 2.1),
    (0.2, 8.4, 2.1, 4.5, 0.1),
    (0.4, 2.7, 6.3, 4.6, 3.5),
    (3.2, 0.3, 0.3, 2.1, 1.5),
    (0.2, 0.5, 0.5, 2.2, 2.3),
)


def sales_rows(store_order=None):
    """Fact rows ``(product, store, sales)``, product-major.

    Stores are visited in alphabetical order by default. The per-pass
    eviction trace of the streaming dicer depends on row order; this order
    gives the reference eviction order (Chicago and TV go in pass 1; Berlin,
    Game console and DVD Player in pass 2).
    """
    stores = sorted(STORES) if store_order is None else list(store_order)
    rows = []
    for p, product in enumerate(PRODUCTS):
        for store in stores:
            rows.append((product, store, SALES[p][STORES.index(store)]))
    return rows


def sales_cube(store_order=None) -> Cube:
    return ingest_facts(sales_rows(store_order), ["product", "store"])


SALES_DIAMOND_PRODUCTS = ("Camcorder", "Phone", "Camera")
SALES_DIAMOND_STORES = ("Montreal", "Miami", "Paris")


# 10x10 COUNT cube: a 16-cell top-left block and a 15-cell 3-regular
# bottom-right block; the 3-carat diamond is the bottom-right block.
TWO_BLOCK_CELLS = (
    [(r, c) for r in (0, 1) for c in range(5)]
    + [(r, c) for r in (2, 3, 4) for c in (0, 1)]
    + [(5, 5), (5, 6), (5, 7),
       (6, 6), (6, 7), (6, 8),
       (7, 7), (7, 8), (7, 9),
       (8, 5), (8, 8), (8, 9),
       (9, 5), (9, 6), (9, 9)]
)


def two_block_cube() -> Cube:
    matrix = np.zeros((10, 10), dtype=np.int64)
    for r, c in TWO_BLOCK_CELLS:
        matrix[r, c] = 1
    return cube_from_matrix(matrix)


def alternating_matrix_cube() -> Cube:
    """4x4 matrix of alternating +1/-1; two disjoint maximal 2-sum-carat cubes."""
    matrix = np.array([[1 if (i + j) % 2 == 0 else -1 for j in range(4)] for i in range(4)])
    return cube_from_matrix(matrix)
