"""Drive the command-line interface the way a shell script would.

Three commands: ``check`` classifies a configuration against the coefficient
certificate, ``simulate`` writes a trajectory CSV, and ``experiment`` runs a
named study and writes a machine-checkable verdict JSON.  Exit codes are the
contract: 0 success, 2 usage/config error, 3 runtime failure, 4 failed
verdict.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run(args, config):
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "config.json"
        cfg.write_text(json.dumps(config))
        proc = subprocess.run(
            [sys.executable, "-m", "theta_stationary.cli", *args, str(cfg)],
            capture_output=True, text=True)
    return proc


def main():
    print("$ theta-stationary check config.json   # valid implicit configuration")
    proc = run(["check"], {"problem": "cubic1d", "theta": 1.0, "h": 0.5})
    doc = json.loads(proc.stdout)
    print(f"    exit={proc.returncode}  regime={doc['regime']['regime']}  "
          f"valid={doc['regime']['valid']}  conditions={doc['conditions']['passed']}")

    print("$ theta-stationary check config.json   # explicit scheme past its cap")
    proc = run(["check"], {"problem": "cubic1d", "theta": 0.0, "h": 2.0})
    doc = json.loads(proc.stdout)
    print(f"    exit={proc.returncode}  valid={doc['regime']['valid']}")
    for reason in doc["regime"]["reasons"]:
        print(f"    reason: {reason}")

    with tempfile.TemporaryDirectory() as out:
        print("$ theta-stationary simulate config.json")
        proc = run(["simulate"], {"problem": "ou", "theta": 0.5, "h": 0.1,
                                  "n_steps": 50, "seed": 9, "output_dir": out})
        summary = json.loads(proc.stdout)
        print(f"    exit={proc.returncode}  rows={summary['rows']}  "
              f"terminal_mean={summary['terminal_mean'][0]:+.4f}")

        print("$ theta-stationary experiment config.json   # negative control passes"
              " by diverging")
        proc = run(["experiment"], {"problem": "cubic1d", "experiment": "moment",
                                    "theta": 0.0, "h": 0.5, "n_paths": 20,
                                    "seed": 3, "output_dir": out})
        verdict = json.loads(proc.stdout)
        print(f"    exit={proc.returncode}  pass={verdict['pass']}  "
              f"diverged={verdict['metrics']['diverged']}")


if __name__ == "__main__":
    main()
