"""Run a short fit with the bchaz executable and validate summary.json
against the published schema, then check a few cross-field invariants."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main():
    exe, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        subprocess.run([exe, "simulate", "--n=80", "--seed=3", f"--out={tmp / 'sim'}"], check=True, capture_output=True)
        subprocess.run(
            [exe, "fit", f"--data={tmp / 'sim' / 'data.csv'}", "--intervals=3", "--burn-in=100", "--thin=1",
             "--samples=150", f"--out={tmp / 'fit'}"],
            check=True, capture_output=True)
        doc = json.loads((tmp / "fit" / "summary.json").read_text())
    jsonschema.validate(doc, schema)
    p = len(doc["config"]["covariates"])
    J = doc["config"]["intervals"]
    assert len(doc["summaries"]) == p + J, "one summary per parameter"
    assert len(doc["config"]["cut_points"]) == J + 1
    assert len(doc["fit"]["cpo"]) == 80
    for s in doc["summaries"]:
        assert s["hpd_low"] <= s["hpd_high"]
    bad = {"config": {}, "level": 2}
    try:
        jsonschema.validate(bad, schema)
    except jsonschema.ValidationError:
        pass
    else:
        raise AssertionError("schema accepted a malformed document")
    print("summary.json validates")


if __name__ == "__main__":
    main()
