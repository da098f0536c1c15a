"""Minimal external-solver bridge around HiGHS (``pip install highspy``).

Usage: ``python -m fairmio.highs_bridge model.lp solution.txt``. Writes one
``name value`` line per column, the format :func:`fairmio.milp.import_solution`
reads.
"""

import sys


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m fairmio.highs_bridge MODEL.lp SOLUTION.txt", file=sys.stderr)
        return 2
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.readModel(argv[0])
    h.run()
    if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
        print(f"HiGHS status: {h.modelStatusToString(h.getModelStatus())}", file=sys.stderr)
        return 1
    lp = h.getLp()
    values = h.getSolution().col_value
    with open(argv[1], "w", encoding="utf-8") as fh:
        for name, val in zip(lp.col_names_, values):
            fh.write(f"{name} {val!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
