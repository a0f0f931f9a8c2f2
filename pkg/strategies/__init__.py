"""
Strategies Package

Sensor selection strategies. Each strategy is in its own file and derives
from BaseStrategy.
"""

from .base_strategy import BaseStrategy
from .random_strategy import RandomStrategy, select_random
from .maximin_strategy import MaximinStrategy, maximin_order, select_maximin
from .rank_band_strategy import RankBandStrategy, importance_ranking, select_by_rank
from .selection_manager import SelectionManager

__all__ = [
    'BaseStrategy',
    'RandomStrategy',
    'MaximinStrategy',
    'RankBandStrategy',
    'SelectionManager',
    'select_random',
    'select_maximin',
    'maximin_order',
    'select_by_rank',
    'importance_ranking',
]
