import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "docs" / "config.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)
failures = 0
for path in sorted((root / "configs").glob("*.json")):
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    print(f"{path.name}: {'ok' if not errors else errors[0].message}")
    failures += bool(errors)
for bad in ({"na": "big"}, {"unknown": 1}, {"photon": {"quantum_yield": 2}}, {"stack": {"preset": "x"}}):
    if validator.is_valid(bad):
        print(f"accepted invalid document {bad}")
        failures += 1
sys.exit(1 if failures else 0)
