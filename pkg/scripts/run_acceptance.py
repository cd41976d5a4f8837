"""Run the acceptance criteria and print one PASS/FAIL line per criterion.

    python scripts/run_acceptance.py            # all criteria
    python scripts/run_acceptance.py 2 3 10     # a subset
"""

import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "tests"))

import test_acceptance as acc  # noqa: E402


def main(argv):
    wanted = {int(a) for a in argv} or set(range(1, 11))
    failed = 0
    for name in sorted((n for n in dir(acc) if n.startswith("test_criterion_")), key=lambda n: int(n.split("_")[2])):
        if int(name.split("_")[2]) not in wanted:
            continue
        try:
            getattr(acc, name)()
        except AssertionError:
            failed += 1
    print(f"{len(wanted) - failed}/{len(wanted)} criteria passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
