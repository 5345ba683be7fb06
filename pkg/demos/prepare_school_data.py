"""Build the school CSV from the two yearly performance files.

The public files list one row per school and year with a school identifier,
the performance category, the funding type and the number of registered
students.  This script joins 2016 to 2019 on the identifier, keeps schools
present in both years with a valid category, maps the funding codes to
Public / Mixed / Private and writes ``perf2016,funding,regisRat,perf2019``.

Column names differ between releases, so all of them are arguments::

    python demos/prepare_school_data.py raw2016.csv raw2019.csv schools.csv \\
        --id RBD --category CAT_DES --funding COD_DEPE --students MAT_TOTAL
"""

import argparse
import csv

CATEGORIES = {"1": "High", "2": "Medium", "3": "Medium-Low", "4": "Insufficient",
              "Alto": "High", "Medio": "Medium", "Medio-Bajo": "Medium-Low", "Insuficiente": "Insufficient"}
FUNDING = {"1": "Public", "2": "Public", "3": "Mixed", "4": "Private", "5": "Public", "6": "Public"}


def read(path, key):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        return {row[key]: row for row in csv.DictReader(fh)}


parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("y2016")
parser.add_argument("y2019")
parser.add_argument("out")
parser.add_argument("--id", default="RBD")
parser.add_argument("--category", default="CAT_DES")
parser.add_argument("--funding", default="COD_DEPE")
parser.add_argument("--students", default="MAT_TOTAL")
args = parser.parse_args()

early, late = read(args.y2016, args.id), read(args.y2019, args.id)
kept = dropped = 0
with open(args.out, "w", newline="", encoding="utf-8") as fh:
    w = csv.writer(fh)
    w.writerow(["perf2016", "funding", "regisRat", "perf2019"])
    for sid, row in late.items():
        old = early.get(sid)
        try:
            before, after = CATEGORIES[old[args.category]], CATEGORIES[row[args.category]]
            funding = FUNDING[row[args.funding]]
            ratio = float(row[args.students]) / float(old[args.students])
        except (TypeError, KeyError, ValueError, ZeroDivisionError):
            dropped += 1
            continue
        w.writerow([before, funding, f"{ratio:.5f}", after])
        kept += 1
print(f"kept {kept} schools, dropped {dropped} ({100 * dropped / max(kept + dropped, 1):.1f}%)")
