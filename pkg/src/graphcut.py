"""
Refinamiento por intercambio de etiquetas (alpha-beta swap) con corte mínimo.

Para cada par (alpha, beta), los píxeles con esas etiquetas eligen entre ambas
y el resto queda fijo. El problema binario es submodular: el término de Potts
es no negativo y el de suavidad cumple V(a,a) + V(b,b) <= V(a,b) + V(b,a).
Se resuelve exactamente con networkx.minimum_cut. Solo para imágenes pequeñas:
el grafo incluye todas las aristas densas del Potts.
"""

import logging
from itertools import combinations
from typing import Callable

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

SOURCE = "s"
SINK = "t"


class SwapRefiner:
    """
    kernel: matriz N×N exacta con diagonal nula.
    log_shading: N×k, log del sombreado de cada píxel bajo cada etiqueta.
    edges: pares (i, j) de 4-vecinos, cada par una sola vez.
    energy: energía total de un etiquetado duro.
    """

    def __init__(self, kernel: np.ndarray, log_shading: np.ndarray, edges: np.ndarray,
                 w_p: float, w_s: float, w_l: float, log_range: tuple,
                 energy: Callable[[np.ndarray], float]):
        self.kernel = kernel
        self.log_shading = log_shading
        self.edges = edges
        self.w_p = w_p
        self.w_s = w_s
        self.w_l = w_l
        self.lo, self.hi = log_range
        self.energy = energy
        self.n, self.k = log_shading.shape

        self.neighbors = [[] for _ in range(self.n)]
        for i, j in edges:
            self.neighbors[i].append(j)
            self.neighbors[j].append(i)

    def _hinge_sq(self, v):
        gap = np.maximum(np.maximum(self.lo - v, v - self.hi), 0.0)
        return gap * gap

    def _swap(self, hard: np.ndarray, alpha: int, beta: int) -> np.ndarray:
        members = np.flatnonzero((hard == alpha) | (hard == beta))
        if len(members) == 0:
            return hard
        inside = np.zeros(self.n, dtype=bool)
        inside[members] = True
        labels = (alpha, beta)

        # Costo de cada opción: índice 0 -> alpha, 1 -> beta
        cost = np.zeros((len(members), 2))
        for slot, label in enumerate(labels):
            s = self.log_shading[members, label]
            cost[:, slot] += self.w_l * self._hinge_sq(s)
            outside_potts = self.kernel[np.ix_(members, np.flatnonzero(~inside))]
            outside_labels = hard[~inside]
            cost[:, slot] += self.w_p * (outside_potts * (outside_labels[None, :] != label)).sum(axis=1)
        for row, i in enumerate(members):
            for j in self.neighbors[i]:
                if not inside[j]:
                    s_j = self.log_shading[j, hard[j]]
                    for slot, label in enumerate(labels):
                        cost[row, slot] += self.w_s * (self.log_shading[i, label] - s_j) ** 2

        graph = nx.DiGraph()
        graph.add_node(SOURCE)
        graph.add_node(SINK)
        position = {int(i): row for row, i in enumerate(members)}

        def add(u, v, capacity):
            if capacity <= 0:
                return
            if graph.has_edge(u, v):
                graph[u][v]["capacity"] += capacity
            else:
                graph.add_edge(u, v, capacity=capacity)

        def add_pair(a, b, pair_cost):
            # pair_cost[xa][xb]; x = 0 alpha (lado fuente), 1 beta (lado sumidero)
            A, B = pair_cost[0][0], pair_cost[0][1]
            C, D = pair_cost[1][0], pair_cost[1][1]
            cost[a, 1] += C - A
            cost[b, 1] += D - C
            add(int(members[a]), int(members[b]), B + C - A - D)

        for a, b in combinations(range(len(members)), 2):
            k_ab = self.kernel[members[a], members[b]]
            if k_ab > 0:
                add_pair(a, b, [[0.0, self.w_p * k_ab], [self.w_p * k_ab, 0.0]])
        for i, j in self.edges:
            if inside[i] and inside[j]:
                a, b = position[int(i)], position[int(j)]
                pair = [[self.w_s * (self.log_shading[i, li] - self.log_shading[j, lj]) ** 2
                         for lj in labels] for li in labels]
                add_pair(a, b, pair)

        for row, i in enumerate(members):
            node = int(i)
            graph.add_node(node)
            shift = min(cost[row, 0], cost[row, 1])
            add(SOURCE, node, cost[row, 1] - shift)
            add(node, SINK, cost[row, 0] - shift)

        _, (source_side, _) = nx.minimum_cut(graph, SOURCE, SINK)
        proposal = hard.copy()
        for i in members:
            proposal[i] = alpha if int(i) in source_side else beta
        return proposal

    def refine(self, hard: np.ndarray, max_sweeps: int = 5):
        """Barridos de swaps; un movimiento se acepta solo si baja estrictamente la energía"""
        best = np.asarray(hard).copy()
        best_energy = self.energy(best)
        for sweep in range(max_sweeps):
            improved = False
            for alpha, beta in combinations(range(self.k), 2):
                proposal = self._swap(best, alpha, beta)
                energy = self.energy(proposal)
                if energy < best_energy - 1e-12:
                    best, best_energy = proposal, energy
                    improved = True
            if not improved:
                break
        logger.debug(f"Swap: energía final {best_energy:.6f}")
        return best, best_energy
