"""Generate the bundled breast-cancer-style survival fixture.

The real GBSG2 cohort cannot be redistributed from this environment, so the
package ships a synthetic surrogate with the same shape and marginal
behaviour: 686 node-positive patients, eight clinical covariates (hormonal
therapy, age, menopausal status, tumor size, tumor grade, positive nodes,
progesterone and estrogen receptor), right-censored follow-up in days, and
exactly 299 observed events. Event times follow a Weibull proportional
hazards model whose effect sizes are calibrated so that random survival
forests reach the discrimination regime reported for the real cohort.

Deterministic: rerunning this script reproduces the CSV byte-for-byte.
"""
from __future__ import annotations

import pathlib

import numpy as np
import pandas as pd

SEED = 20240686
N = 686
TARGET_EVENTS = 299

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "fedsurv" / "data" / "gbsg2.csv"


def draw_covariates(rng: np.random.Generator) -> pd.DataFrame:
    age = np.clip(np.rint(rng.normal(53, 10, N)), 21, 80)
    menostat = np.where(age + rng.normal(0, 4, N) >= 50, "Post", "Pre")
    horth = np.where(rng.random(N) < 246 / 686, "yes", "no")
    tsize = np.clip(np.rint(rng.lognormal(np.log(25), 0.45, N)), 3, 120)
    tgrade = rng.choice(["I", "II", "III"], size=N, p=[81 / 686, 444 / 686, 161 / 686])
    pnodes = np.clip(np.rint(rng.lognormal(np.log(3), 0.9, N)), 1, 51)
    base = rng.normal(0, 1, N)
    progrec = np.clip(np.rint(np.exp(3.2 + 1.5 * base + 0.8 * rng.normal(0, 1, N))) - 1, 0, 2380)
    estrec = np.clip(np.rint(np.exp(3.0 + 1.2 * base + 0.9 * rng.normal(0, 1, N))) - 1, 0, 1144)
    return pd.DataFrame({
        "horTh": horth, "age": age, "menostat": menostat, "tsize": tsize,
        "tgrade": tgrade, "pnodes": pnodes, "progrec": progrec, "estrec": estrec,
    })


def linear_predictor(X: pd.DataFrame, alpha: float) -> np.ndarray:
    lp = (
        -0.40 * (X["horTh"] == "yes").to_numpy(float)
        + 0.012 * (X["tsize"].to_numpy(float) - 28.0)
        + 0.55 * (X["tgrade"] == "II").to_numpy(float)
        + 0.85 * (X["tgrade"] == "III").to_numpy(float)
        + 0.55 * (np.log1p(X["pnodes"].to_numpy(float)) - np.log1p(3.0))
        - 0.28 * (np.log1p(X["progrec"].to_numpy(float)) - np.log(60.0))
        - 0.10 * (np.log1p(X["estrec"].to_numpy(float)) - np.log(40.0))
        + 0.012 * (X["age"].to_numpy(float) - 53.0)
        + 0.18 * (X["menostat"] == "Post").to_numpy(float)
    )
    return alpha * lp


def simulate(alpha: float = 1.0, seed: int = SEED) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    X = draw_covariates(rng)
    lp = linear_predictor(X, alpha)
    shape = 1.3
    scale = 2400.0
    latent = scale * (rng.exponential(1.0, N) / np.exp(lp)) ** (1.0 / shape)

    censor_draw = rng.uniform(0.1, 1.0, N)

    def realize(censor_scale: float):
        censor = np.maximum(1.0, censor_scale * 3000.0 * censor_draw)
        time = np.minimum(latent, censor)
        event = latent <= censor
        return np.maximum(1.0, np.rint(time)), event

    lo, hi = 0.05, 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, event = realize(mid)
        n_events = int(event.sum())
        if n_events == TARGET_EVENTS:
            break
        if n_events < TARGET_EVENTS:
            lo = mid
        else:
            hi = mid
    time, event = realize(mid)
    assert int(event.sum()) == TARGET_EVENTS, int(event.sum())
    out = X.copy()
    out["time"] = time.astype(int)
    out["event"] = event.astype(int)
    return out


def main():
    df = simulate()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(OUT, index=False)
    print(f"wrote {OUT}: {len(df)} rows, {int(df['event'].sum())} events")


if __name__ == "__main__":
    main()
