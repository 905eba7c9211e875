#!/usr/bin/env python3
"""Walk one instance through the factuality metric with mock backends.

Scores the reference against itself (identity), a half hypothesis, a
hallucinated hypothesis, and the empty string, printing the per-question
breakdown for the half case.
"""

import json

from keytext.backends import Backends
from keytext.mafe import evaluate
from keytext.synthetic import make_identity_instance


def main() -> int:
    backends = Backends.mock()
    inst = make_identity_instance(seed=7, n_triples=3)
    sentences = inst.reference.split(". ")
    half = sentences[0] + "."
    hallucination = "Zorblax Quine invented the rotating flumbus in 1893."

    print(f"entity:    {inst.entity}")
    print(f"reference: {inst.reference}\n")
    for name, hyp in [("identity", inst.reference), ("half", half),
                      ("hallucination", hallucination), ("empty", "")]:
        report = evaluate(hyp, inst.reference, inst.triples(), backends)
        print(f"{name:>13}: recall={report.recall:.3f} precision={report.precision:.3f} "
              f"f1={report.f1:.3f} flags={report.flags}")

    print("\nper-question breakdown for the half hypothesis:")
    report = evaluate(half, inst.reference, inst.triples(), backends)
    for item in report.items:
        print(json.dumps(item.to_obj(), ensure_ascii=False))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
