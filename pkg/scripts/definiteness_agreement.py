"""Compare the orbit-invariant and rank-criterion definiteness tests on seeded random 3-forms."""

import argparse
import time

import numpy as np

from g2lab.exterior import AltForm, pullback
from g2lab.stable_forms import hitchin_lambda, is_definite6, normal_form_psi0


def sample_form(i: int) -> AltForm:
    rng = np.random.default_rng(i)
    if i % 3 == 0:
        return AltForm(6, 3, rng.normal(size=20))
    g = np.eye(6) + 0.5 * rng.normal(size=(6, 6))
    if i % 3 == 1:
        return pullback(normal_form_psi0(), g)
    split = AltForm.from_terms(6, 3, {("v1", "v2", "v3"): 1, ("w1", "w2", "w3"): 1})
    return pullback(split, g)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--samples", type=int, default=64)
    args = ap.parse_args()

    start = time.perf_counter()
    counts = {"Definite": 0, "OtherOpenOrbit": 0, "Degenerate": 0}
    disagree = []
    for i in range(args.count):
        psi = sample_form(i)
        verdict = hitchin_lambda(psi).verdict.value
        counts[verdict] += 1
        sampled = is_definite6(psi, "sampled", n=args.samples, seed=i).definite
        if (verdict == "Definite") != sampled:
            disagree.append(i)
    elapsed = time.perf_counter() - start
    print(f"forms: {args.count}  orbit counts: {counts}")
    print(f"disagreements: {len(disagree)} {disagree[:10]}")
    print(f"elapsed: {elapsed:.2f}s")


if __name__ == "__main__":
    main()
