#!/usr/bin/env python3
"""
Tests for layering configuration files and command-line flags.
"""

import os
import shutil
import sys
import tempfile
import unittest

import yaml

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from data_model import DecomposeConfig, SynthConfig
from pydantic import ValidationError
from utils.run_configuration import ConfigFileError, RunConfiguration, build_run_config


class TestRunConfiguration(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.config_path = os.path.join(self.temp_dir, "decompose.yaml")
        with open(self.config_path, "w", encoding="utf-8") as f:
            yaml.safe_dump({"input": "t.tnsr", "output": "out", "algo": "hooi", "ranks": [2, 2, 2]}, f)

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_file_only(self):
        config = build_run_config(DecomposeConfig, self.config_path)
        self.assertEqual(config.ranks, [2, 2, 2])
        self.assertEqual(config.max_iters, 200)

    def test_flags_override_file(self):
        config = build_run_config(DecomposeConfig, self.config_path, {"ranks": [3, 1, 1], "seed": 9})
        self.assertEqual(config.ranks, [3, 1, 1])
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.input, "t.tnsr")

    def test_unset_flags_are_ignored(self):
        configuration = RunConfiguration(DecomposeConfig)
        configuration.load_config_file(self.config_path)
        self.assertEqual(configuration.apply_flags({"ranks": None, "tol": 1e-6}), {"tol": 1e-6})
        self.assertEqual(configuration.merged()["ranks"], [2, 2, 2])

    def test_flags_without_file(self):
        config = build_run_config(SynthConfig, flags={"kind": "cp", "output": "out", "rank": 4})
        self.assertEqual(config.rank, 4)

    def test_merged_values_are_validated(self):
        with self.assertRaises(ValidationError):
            build_run_config(DecomposeConfig, self.config_path, {"algo": "cp"})

    def test_non_mapping_file(self):
        path = os.path.join(self.temp_dir, "list.yaml")
        with open(path, "w", encoding="utf-8") as f:
            f.write("- 1\n- 2\n")
        with self.assertRaises(ConfigFileError):
            RunConfiguration(SynthConfig).load_config_file(path)

    def test_unparseable_files(self):
        for name, text in (("broken.yaml", "kind: [cp\n"), ("broken.json", "{\"kind\": ")):
            path = os.path.join(self.temp_dir, name)
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
            with self.subTest(config=name):
                with self.assertRaises(ConfigFileError):
                    build_run_config(SynthConfig, path)


if __name__ == '__main__':
    unittest.main()
