"""Regenerates include/t2vqa/detail/studentized_range_table.hpp.

Upper-tail critical values of the studentized range distribution,
q(alpha; k, df), computed with scipy.stats.studentized_range.
"""
import math
import sys

from scipy.stats import studentized_range

ALPHAS = (0.01, 0.05)
GROUPS = range(2, 11)
DF = list(range(1, 21)) + [24, 30, 40, 60, 120, math.inf]


def main(out):
    w = out.write
    w("// Generated by tools/gen/studentized_range_table.py. Do not edit.\n")
    w("#pragma once\n\n#include <array>\n#include <limits>\n\n")
    w("namespace t2vqa::detail {\n\n")
    w(f"inline constexpr std::array<double, {len(DF)}> kStudentizedRangeDf = {{\n")
    w("    " + ", ".join("std::numeric_limits<double>::infinity()" if math.isinf(d) else f"{d}.0" for d in DF) + "};\n\n")
    w(f"inline constexpr int kStudentizedRangeMinGroups = {GROUPS.start};\n")
    w(f"inline constexpr int kStudentizedRangeMaxGroups = {GROUPS.stop - 1};\n\n")
    for alpha in ALPHAS:
        name = f"kStudentizedRange{int(round(alpha * 100)):02d}"
        w(f"// alpha = {alpha}; rows = df, columns = k = {GROUPS.start}..{GROUPS.stop - 1}\n")
        w(f"inline constexpr double {name}[{len(DF)}][{len(GROUPS)}] = {{\n")
        for d in DF:
            row = [studentized_range.ppf(1 - alpha, k, d if not math.isinf(d) else 1e7) for k in GROUPS]
            w("    {" + ", ".join(f"{v:.4f}" for v in row) + "},\n")
        w("};\n\n")
    w("}  // namespace t2vqa::detail\n")


if __name__ == "__main__":
    main(sys.stdout)
