import logging

import pandas as pd

from freemal.sharpness import build_tower, coverage_bullet, verify_sharpness
from freemal.stallings import contains, rank

log = logging.getLogger(__name__)


def verify_levels(k: int, max_level: int):
    """Sharpness reports for levels 1..max_level, plus a summary table."""
    tower = build_tower(k, max_level + 1)
    reports, rows = [], []
    for i in range(1, max_level + 1):
        report = verify_sharpness(k, i)
        reports.append(report.to_document())
        level, following = tower[i - 1], tower[i]
        rows.append(
            {
                "i": i,
                "L": report.L,
                "rank_A": rank(level.A),
                "rank_C": report.rank_C,
                "bound": report.bound,
                "equality": report.equality,
                "nested": all(contains(following.C, c) for c in level.C_generators),
                "bullet": coverage_bullet(following).ok,
                "witness_length": len(report.witness.word),
            }
        )
    summary = pd.DataFrame(rows)
    log.info(
        f"Verified {max_level} levels for k={k}; "
        f"bound attained at {int(summary['equality'].sum())}"
    )
    return {
        "sharpness_report": {"k": k, "levels": reports},
        "sharpness_summary": summary,
    }
