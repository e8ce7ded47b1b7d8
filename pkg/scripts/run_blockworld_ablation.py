#!/usr/bin/env python3
"""Reproduce the four-block stacking ablation.

Runs the four reference cells -- the bare completion reward, the
progress-gated completion reward, and the two masked-target cells
(progress-scaled and trial-propagated rewards) -- over three seeds at the
20k-action reference settings, then prints the combined table.

Expected shape of the result (one CPU, under a minute):
- none+base stays near zero completion;
- none+sr gains at least forty points over it;
- both spotq cells complete >= 90% of the evaluation trials and beat the
  bare cell on action efficiency.

Everything is delegated to ``spotrl sweep``; any flag here just fills in
that command line, so ``--cells``/``--seeds``/``--set`` accept the same
values the CLI does.
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from spotrl import cli  # noqa: E402

DEFAULT_CELLS = "none+base,none+sr,spotq+progress,spotq+trial_progress"
DEFAULT_SEEDS = "0,1,2"


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/blockworld_ablation",
                        help="sweep output directory")
    parser.add_argument("--task", default="stack", choices=("stack", "row", "clear"),
                        help="block-world task to ablate")
    parser.add_argument("--cells", default=DEFAULT_CELLS,
                        help="comma-separated cell tokens to run")
    parser.add_argument("--seeds", default=DEFAULT_SEEDS,
                        help="comma-separated seeds")
    parser.add_argument("--budget", type=int, default=None,
                        help="override the 20k-action training budget")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel worker processes (default: one per CPU)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any run setting (repeatable)")
    args = parser.parse_args(argv)

    sweep_args = ["sweep", "--env", "blockworld", "--task", args.task,
                  "--cells", args.cells, "--seeds", args.seeds, "--out", args.out]
    if args.budget is not None:
        sweep_args += ["--budget", str(args.budget)]
    if args.workers is not None:
        sweep_args += ["--workers", str(args.workers)]
    for pair in args.set:
        sweep_args += ["--set", pair]
    return cli.main(sweep_args)


if __name__ == "__main__":
    sys.exit(main())
