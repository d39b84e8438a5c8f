"""
Batch runs from the command line
================================

Drives the ``duality-bounds`` entry point in-process: generate two problems,
solve them in parallel, verify one and refine the other. Every report is
plain JSON and identical between runs apart from its ``timing`` entry.
"""
import json
import tempfile
from pathlib import Path

from duality_bounds.cli import main

work = Path(tempfile.mkdtemp(prefix="duality-bounds-"))
a, b = work / "a.json", work / "b.json"
main(["generate", "--dim", "10", "--blocks", "5", "--loss", "0.1", "--coupling", "0.7", "--seed", "102", "-o", str(a)])
main(["generate", "--dim", "12", "--blocks", "6", "--loss", "0.1", "--coupling", "0.8", "--seed", "103", "-o", str(b)])

code = main(["solve", str(a), str(b), "--jobs", "2", "--with-oracle", "--out-dir", str(work / "reports")])
print(f"solve exit code {code} (3 means at least one instance has a gap)")
for rep in sorted((work / "reports").glob("*.json")):
    d = json.loads(rep.read_text())
    print(f"  {rep.name}: D* = {d['dual_value']:.6f}, {d['certificate']['kind']}, "
          f"oracle {d['weak_duality']['oracle_value']:.6f}")

code = main(["verify", str(a), "--state", str(work / "reports" / "a.report.json"),
             "--points", "10", "--samples", "50", "-o", str(work / "verify.json")])
suites = json.loads((work / "verify.json").read_text())["suites"]
print(f"verify exit code {code}: " + ", ".join(f"{k}={v['passed']}" for k, v in suites.items()))

code = main(["refine", str(b), "-o", str(work / "trace.json")])
d = json.loads((work / "trace.json").read_text())
print(f"refine exit code {code}: {d['restarts']} restarts, final {d['trace']['final']['kind']}, "
      f"feedback bound {d.get('feedback_bound')} vs original {d['original_bound']:.6f}")
print(f"files in {work}")
