#!/usr/bin/env python3
# Copyright 2026 The kinetic-ergo Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Validates configs and summary files against the shipped JSON schemas.

usage: check_schemas.py SCHEMA_DIR (--config FILE | --summary FILE)...
"""

import argparse
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("schema_dir", type=pathlib.Path)
    parser.add_argument("--config", action="append", default=[], type=pathlib.Path)
    parser.add_argument("--summary", action="append", default=[], type=pathlib.Path)
    args = parser.parse_args()

    schemas = {}
    registry = Registry()
    for name in ("experiment.schema.json", "summary.schema.json"):
        doc = json.loads((args.schema_dir / name).read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        schemas[name] = doc
        resource = Resource.from_contents(doc)
        registry = registry.with_resources([(doc["$id"], resource), (name, resource)])

    failures = 0
    jobs = [(p, "experiment.schema.json") for p in args.config] + [(p, "summary.schema.json") for p in args.summary]
    for path, name in jobs:
        validator = jsonschema.Draft202012Validator(schemas[name], registry=registry)
        errors = sorted(validator.iter_errors(json.loads(path.read_text())), key=lambda e: list(e.path))
        for err in errors:
            print(f"{path}: {'/'.join(map(str, err.path))}: {err.message}", file=sys.stderr)
        failures += bool(errors)
        print(f"{'ok  ' if not errors else 'FAIL'} {path} ({name})")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
