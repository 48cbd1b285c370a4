"""Build the shipped decision fixtures.

Writes distribution and payoff JSONs under src/orangecast/fixtures/decision/
with exact exceedance counts at tau = 5: the 2018 non-Valencia
distribution has 930 of 1000 samples strictly above 5 (p = 0.93) and the
2017 Valencia one has 3 of 1000 (p = 0.003). Sample values are drawn
from seeded normals and split at the threshold so the files look like
real bootstrap output while the counts stay exact.

Run from the repository root:  python3 scripts/build_decision_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from orangecast.decision import (  # noqa: E402
    PayoffEstimates,
    load_payoffs,
    save_payoffs,
)
from orangecast.forecast import (  # noqa: E402
    ErrorDistribution,
    exceedance_probability,
    load_distribution,
    save_distribution,
)
from orangecast.ingest import OrangeType  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "src/orangecast/fixtures/decision"
TAU = 5.0
# values strictly inside (4.98, 5.02) are discarded so float comparisons
# against tau can never flip a sample across the threshold
GAP = 0.02


def crafted_samples(
    rng: np.random.Generator, mean: float, sd: float, n_above: int, b: int = 1000
) -> np.ndarray:
    pool = rng.normal(mean, sd, size=20 * b)
    above = pool[pool > TAU + GAP]
    below = pool[pool < TAU - GAP]
    if len(above) < n_above or len(below) < b - n_above:
        raise RuntimeError("pool too small; widen the draw")
    samples = np.concatenate([above[:n_above], below[: b - n_above]])
    return np.sort(samples)


def build_distribution(
    season: int,
    orange_type: OrangeType,
    point: float,
    sd: float,
    n_above: int,
    source_model: str,
) -> ErrorDistribution:
    rng = np.random.default_rng(season * 10000 + 1012)
    samples = crafted_samples(rng, point, sd, n_above)
    return ErrorDistribution(
        samples=tuple(float(s) for s in samples),
        point_estimate=point,
        b=1000,
        seed=0,
        source_model=source_model,
        season_year=season,
        orange_type=orange_type,
        tilt="no_tilt",
        degenerate=False,
    )


def build_payoffs(
    orange_type: OrangeType, e_long: float, e_short: float
) -> PayoffEstimates:
    return PayoffEstimates(
        orange_type=orange_type,
        e_long_cents_per_lb=e_long / 150.0,
        e_short_cents_per_lb=e_short / 150.0,
        e_long_per_contract=e_long,
        e_short_per_contract=e_short,
        n_positive_years=22,
        n_negative_years=15,
        b=1000,
        seed=0,
        contract_lbs=15000,
        skipped_years=(),
        flags=(),
    )


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    nv = build_distribution(
        2018, OrangeType.NON_VALENCIA, 9.1, 2.6, 930, "nonvalencia_cluster"
    )
    v = build_distribution(2017, OrangeType.VALENCIA, -1.4, 2.2, 3, "valencia_cluster")
    nv_path = OUT_DIR / "distribution_nonvalencia_2018.json"
    v_path = OUT_DIR / "distribution_valencia_2017.json"
    save_distribution(nv, nv_path)
    save_distribution(v, v_path)

    pay_nv = build_payoffs(OrangeType.NON_VALENCIA, 3060.4, 1963.0)
    pay_v = build_payoffs(OrangeType.VALENCIA, 3947.5, 2811.1)
    pay_nv_path = OUT_DIR / "payoffs_nonvalencia.json"
    pay_v_path = OUT_DIR / "payoffs_valencia.json"
    save_payoffs(pay_nv, pay_nv_path)
    save_payoffs(pay_v, pay_v_path)

    for path, want in ((nv_path, 0.93), (v_path, 0.003)):
        got = exceedance_probability(load_distribution(path), TAU)
        status = "ok" if got == want else "MISMATCH"
        print(f"{path.name}: p_exceed({TAU:g}) = {got} ({status})")
    for path in (pay_nv_path, pay_v_path):
        p = load_payoffs(path)
        print(
            f"{path.name}: e_long ${p.e_long_per_contract:,.2f} "
            f"e_short ${p.e_short_per_contract:,.2f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
