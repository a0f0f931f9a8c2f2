"""
Sensitivity Report

Bundles the three scoring stages for one trained model and renders them as
the scores.csv table. A report can be rebuilt from that table, which is
what lets a pipeline resume after any scoring stage.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd

from core.data_models import CgReport, ConfidenceScores, ImportanceScores, ImputedScores
from core.errors import ConfigError

SCORE_COLUMNS = ['sensor_id', 'S_raw', 'l_i', 'grad_norm', 'cg_iters', 'cg_rrel', 'cg_converged']
CONFIDENCE_COLUMNS = ['C_S', 'C_G', 'C', 's', 'z']
IMPUTATION_COLUMNS = ['S_tilde', 'trusted']


@dataclass
class SensitivityReport:
    """
    Raw scores, and optionally their confidence and imputed values.

    `metadata` carries the settings echoed into the JSON sidecar
    (damping, confidence parameters, imputation settings).
    """
    scores: ImportanceScores
    sensor_ids: np.ndarray
    confidence: Optional[ConfidenceScores] = None
    imputed: Optional[ImputedScores] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.sensor_ids = np.asarray(self.sensor_ids, dtype=int)
        if self.sensor_ids.size != len(self.scores.S):
            raise ConfigError("one sensor id per score required", field='sensor_ids')

    @property
    def n_sensors(self) -> int:
        return int(self.sensor_ids.size)

    @property
    def stage(self) -> str:
        """Last completed scoring stage"""
        if self.imputed is not None:
            return 'impute'
        if self.confidence is not None:
            return 'confidence'
        return 'score'

    def ranking_scores(self) -> np.ndarray:
        """S_tilde when imputed, otherwise the raw scores"""
        if self.imputed is not None:
            return self.imputed.S_tilde
        return self.scores.S

    def to_frame(self) -> pd.DataFrame:
        frame = self.scores.to_frame(self.sensor_ids)
        if self.confidence is not None:
            frame = pd.concat([frame, self.confidence.to_frame()], axis=1)
        if self.imputed is not None:
            frame['S_tilde'] = self.imputed.S_tilde
            frame['trusted'] = self.imputed.trusted_mask
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, metadata: Optional[Dict] = None
                   ) -> 'SensitivityReport':
        """Rebuild a report from a scores.csv table."""
        missing = [c for c in SCORE_COLUMNS if c not in frame.columns]
        if missing:
            raise ConfigError(f"scores table lacks columns {missing}", field='scores')
        frame = frame.sort_values('sensor_id').reset_index(drop=True)
        rrel = frame['cg_rrel'].to_numpy(dtype=float)
        reports = [
            CgReport(iterations=int(it), r_rel=float(r), converged=bool(conv),
                     solution=np.empty(0), aborted=bool(np.isnan(r)))
            for it, r, conv in zip(frame['cg_iters'], rrel, frame['cg_converged'])
        ]
        metadata = dict(metadata or {})
        scores = ImportanceScores(
            S=frame['S_raw'].to_numpy(dtype=float),
            cg_reports=reports,
            losses=frame['l_i'].to_numpy(dtype=float),
            grad_norms=frame['grad_norm'].to_numpy(dtype=float),
            damping=float(metadata.get('damping', 0.0)),
            grad_error_norm=float(metadata.get('grad_error_norm', 0.0)),
        )
        confidence = None
        if all(c in frame.columns for c in CONFIDENCE_COLUMNS):
            confidence = ConfidenceScores(**{c: frame[c].to_numpy(dtype=float)
                                             for c in CONFIDENCE_COLUMNS})
        imputed = None
        if all(c in frame.columns for c in IMPUTATION_COLUMNS):
            imputed = ImputedScores(
                S_tilde=frame['S_tilde'].to_numpy(dtype=float),
                trusted_mask=frame['trusted'].to_numpy(dtype=bool),
                iterations=int(metadata.get('imputation_iterations', 0)),
                converged=bool(metadata.get('imputation_converged', True)),
                isolated_nodes=list(metadata.get('isolated_nodes', [])),
            )
        return cls(scores=scores, sensor_ids=frame['sensor_id'].to_numpy(dtype=int),
                   confidence=confidence, imputed=imputed, metadata=metadata)
