# This file is part of soliton_forge.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

import json
import math
import os
import tempfile
import unittest

from jsonschema import Draft202012Validator

from soliton_forge import CONFIG_SCHEMA, DEFAULT_TOLERANCES, ConfigError, RunConfig, config_hash


class RunConfigTestCase(unittest.TestCase):
    """Tests for run configuration validation and defaults."""

    def test_defaults(self):
        config = RunConfig("sge")
        self.assertEqual(config.ndim, 2)
        self.assertEqual(config.grid_spec().dims, (101, 101))
        self.assertEqual(config.grid_spec().origin, (-1.0, -1.0))
        self.assertEqual(config.qstar0, math.pi / 2)
        self.assertEqual(config.resolved_tolerances(), DEFAULT_TOLERANCES)
        self.assertEqual(config.log_level, "INFO")

    def test_command_dimensions(self):
        self.assertEqual(RunConfig("gsge", n=3, theta=[1.0]).grid_spec().dims, (41, 41, 41))
        self.assertEqual(RunConfig("dress", n=4).grid_spec().dims, (11,) * 4)
        self.assertEqual(RunConfig("dress", n=3, grid=[9]).grid_spec().dims, (9, 9, 9))
        self.assertEqual(RunConfig("isothermic", grid=[21, 31]).grid_spec().dims, (21, 31))

    def test_normalization(self):
        config = RunConfig("sge", grid=[21.0], bounds=[0, 2], mu=[1, 2], log_level="debug", substeps=2)
        self.assertEqual(config.grid, (21,))
        self.assertEqual(config.bounds, (0.0, 2.0))
        self.assertEqual(config.mu, (1.0, 2.0))
        self.assertEqual(config.log_level, "DEBUG")
        self.assertEqual(config.substeps, 2)

    def test_tolerance_overrides(self):
        config = RunConfig("sge", tolerances={"residual": 1e-4})
        self.assertEqual(config.resolved_tolerances().residual, 1e-4)
        self.assertEqual(config.resolved_tolerances().path, DEFAULT_TOLERANCES.path)
        with self.assertRaises(ConfigError):
            RunConfig("sge", tolerances={"bogus": 1.0})
        with self.assertRaises(ConfigError):
            RunConfig("sge", tolerances={"residual": -1.0})

    def test_invalid(self):
        invalid = [
            {"command": "kdv"},
            {"command": "sge", "grid": [2]},
            {"command": "sge", "grid": [11, 11, 11]},
            {"command": "sge", "bounds": [1.0, -1.0]},
            {"command": "sge", "log_level": "LOUD"},
            {"command": "sge", "substeps": 0},
            {"command": "sge", "mu": [1.0, 0.0]},
            {"command": "sge", "mu": [math.inf]},
            {"command": "sge", "lie_r": 0.0},
            {"command": "gsge", "n": 5, "theta": [1.0]},
            {"command": "gsge"},
            {"command": "gsge", "theta": [1.0, 1.1, 1.2]},
            {"command": "dress", "s": 0.0},
            {"command": "sge", "bounds": ["0", "2"]},
            {"command": "sge", "substeps": "2"},
            {"command": "sge", "permute": 1},
            {"command": "sge", "mu": 1.0},
            {"command": "sge", "output": None},
            {"command": "dress", "alpha": [0.5, 0.0]},
            {"command": "dress", "s": 1.0, "alpha": [0.5, 1.0]},
            {"command": "dress", "direction": [0.0, 0.0]},
            {"command": "dress", "method": "magic"},
            {"command": "isothermic", "seed": "torus"},
            {"command": "surface", "source": "gsge"},
            {"command": "surface", "sym_r": 0.0},
            {"command": "surface", "dress_s": 0.0},
            {"command": "check"},
        ]
        for data in invalid:
            with self.subTest(data=data):
                with self.assertRaises(ConfigError):
                    RunConfig.from_mapping(data)

    def test_negative_poles(self):
        self.assertEqual(RunConfig.from_mapping({"command": "dress", "s": -0.5}).s, -0.5)
        self.assertEqual(RunConfig.from_mapping({"command": "surface", "dress_s": -0.5}).dress_s, -0.5)

    def test_schema(self):
        Draft202012Validator.check_schema(CONFIG_SCHEMA)
        self.assertEqual(CONFIG_SCHEMA["required"], ["command"])
        with self.assertRaisesRegex(ConfigError, "substeps"):
            RunConfig.from_mapping({"command": "sge", "substeps": 0})
        with self.assertRaisesRegex(ConfigError, "colour"):
            RunConfig.from_mapping({"command": "sge", "colour": "blue"})

    def test_from_mapping(self):
        config = RunConfig.from_mapping({"command": "dress", "n": 3, "alpha": [0.4, 0.6]})
        self.assertEqual(config.alpha, (0.4, 0.6))
        with self.assertRaises(ConfigError):
            RunConfig.from_mapping({"command": "sge", "colour": "blue"})

    def test_load(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "run.json")
            with open(path, "w") as stream:
                json.dump({"command": "sge", "mu": [1.0, 1.5]}, stream)
            self.assertEqual(RunConfig.load(path), {"command": "sge", "mu": [1.0, 1.5]})
            with open(path, "w") as stream:
                json.dump([1, 2], stream)
            with self.assertRaises(ConfigError):
                RunConfig.load(path)
            with self.assertRaises(ConfigError):
                RunConfig.load(os.path.join(directory, "missing.json"))


class ConfigHashTestCase(unittest.TestCase):
    """Tests for configuration hashing."""

    def test_stable(self):
        first = RunConfig("sge", mu=[1.0, 1.5], tolerances={"residual": 1e-4, "path": 1e-7})
        second = RunConfig.from_mapping(
            {"command": "sge", "tolerances": {"path": 1e-7, "residual": 1e-4}, "mu": (1, 1.5)}
        )
        self.assertEqual(config_hash(first), config_hash(second))
        self.assertEqual(len(config_hash(first)), 64)

    def test_sensitive(self):
        self.assertNotEqual(config_hash(RunConfig("sge")), config_hash(RunConfig("sge", substeps=2)))

    def test_to_dict(self):
        data = RunConfig("gsge", theta=[1.0]).to_dict()
        self.assertEqual(list(data), sorted(data))
        self.assertEqual(data["theta"], [1.0])
        json.dumps(data)


if __name__ == "__main__":
    unittest.main()
