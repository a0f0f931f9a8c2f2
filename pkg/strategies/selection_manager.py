"""
Selection Manager

Coordinates the individual selection strategies for one body surface.
Resolves a SelectionSpec to the strategy that serves it.
"""

from typing import Dict, List, Optional

import numpy as np

from core.data_models import SelectionSpec
from core.errors import ConfigError
from core.geometry import WeightedGraph
from .maximin_strategy import MaximinStrategy
from .random_strategy import RandomStrategy
from .rank_band_strategy import RankBandStrategy


class SelectionManager:
    """
    Manages all selection strategies for one candidate sensor set.

    The importance-driven strategies are only available once scores are
    supplied (raw or imputed).
    """

    def __init__(self, graph: WeightedGraph, scores: Optional[np.ndarray] = None):
        """Initialize the strategies that the inputs support"""
        self.strategies = {
            'random': RandomStrategy(graph.node_count),
            'maximin': MaximinStrategy(graph),
        }
        if scores is not None:
            if len(scores) != graph.node_count:
                raise ConfigError(f"{len(scores)} scores for {graph.node_count} sensors",
                                  field='S_tilde')
            ranked = RankBandStrategy(scores)
            self.strategies['fossa_topk'] = ranked
            self.strategies['fossa_band'] = ranked

    def get_available_strategies(self) -> List[str]:
        return list(self.strategies.keys())

    def get_strategy_info(self) -> Dict[str, str]:
        """
        Get information about all strategies.

        Returns:
            Dictionary mapping strategy names to descriptions
        """
        return {name: strategy.get_description().strip()
                for name, strategy in self.strategies.items()}

    def select(self, spec: SelectionSpec) -> np.ndarray:
        """Sensor indices for one selection request"""
        strategy = self.strategies.get(spec.strategy)
        if strategy is None:
            raise ConfigError(f"strategy '{spec.strategy}' needs importance scores; "
                              f"run the score stage first", field='selection.strategy')
        if spec.strategy == 'fossa_band':
            return strategy.select(spec.budget, band=spec.band)
        return strategy.select(spec.budget, seed=spec.seed, start=spec.start, band='high')

    def select_all(self, specs: List[SelectionSpec]) -> Dict[str, np.ndarray]:
        """
        Run every selection request.

        Returns:
            Dictionary of "<label>_k<budget>_s<seed>" -> sorted sensor indices
        """
        return {f"{spec.label}_k{spec.budget}_s{spec.seed}": self.select(spec)
                for spec in specs}
