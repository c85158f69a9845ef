#!/usr/bin/env python3
"""Self-Help scenario on the OSMI twin: gate, curve, breaking point, monitors."""

import argparse
from pathlib import Path

from causal_twin.classifiers import evaluate
from causal_twin.cli import run_monitors
from causal_twin.datasets import OSMI_TARGET
from causal_twin.drift import (RWA, bootstrap_breaking_point, breaking_point, run_scenario,
                               write_bootstrap_csv)
from causal_twin.experiments import SELF_HELP, osmi_twin
from causal_twin.monitors import MonitorConfig
from causal_twin.validation import validate_twin


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replications", type=int, default=50)
    ap.add_argument("--out-dir", type=Path, default=Path("self_help_out"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    setup = osmi_twin(seed=args.seed)
    rep = validate_twin(setup.scm, setup.train, setup.valid, list(setup.models.values()),
                        OSMI_TARGET, seed=args.seed)
    rep.to_csv(args.out_dir / "validation.csv")
    print(f"RMSEA {rep.fit.rmsea:.4f}, gate accepted: {rep.accepted}")
    for kind, model in setup.models.items():
        print(f"  {kind}: validation F1 {evaluate(model, setup.valid).f1:.3f}")

    curve = run_scenario(setup.scm, setup.model, SELF_HELP, args.seed)
    curve.write_steps_csv(args.out_dir / "curve_steps.csv")
    curve.write_stream_csv(args.out_dir / "curve.csv")
    for rule in ("consecutive_steps", RWA):
        bp = breaking_point(curve, rule=rule)
        print(f"breaking point ({bp.rule}): "
              + (f"delta {bp.delta_crit:.3f} at step {bp.step}" if bp.found else "not reached"))

    summ = bootstrap_breaking_point(setup.scm, setup.model, SELF_HELP, args.replications, args.seed)
    write_bootstrap_csv(summ, args.out_dir / "bootstrap.csv")
    print(f"bootstrap: mean {summ.mean:.3f}, 95% CI [{summ.ci_lower:.3f}, {summ.ci_upper:.3f}], "
          f"found {summ.n_found}/{summ.n_replications}")

    mon = run_monitors(setup.scm, setup.model, SELF_HELP, MonitorConfig(), args.seed)
    mon.to_csv(args.out_dir / "monitors.csv")
    ks = [s.ks_p["work_interfere"] for s in mon.steps]
    print(f"monitors: min KS p(work_interfere) {min(ks):.3f}, "
          f"PCA alerts {sum(s.pca_alert for s in mon.steps)}, "
          f"JS alerts {sum(s.js_alert for s in mon.steps)}")
    print(f"precision {mon.steps[0].precision:.3f} -> {mon.steps[-1].precision:.3f}")
    for d in mon.delays:
        print(f"  supervised ({d}): first alert at step {mon.first_alert(d)}")


if __name__ == "__main__":
    main()
