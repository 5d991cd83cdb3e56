#!/usr/bin/env python3
"""
Tests for the command-line parser, error mapping and exit codes.
"""

import argparse
import io
import os
import shutil
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
from pydantic import ValidationError

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from cli.main import build_parser, exit_code_for, float_list, int_list, main, run_command, str_list
from core.types import TensorError
from data_model import SynthConfig
from tensor_io import write_tensor
from utils.run_configuration import ConfigFileError


class TestParser(unittest.TestCase):

    def setUp(self):
        self.parser = build_parser()

    def test_list_types(self):
        self.assertEqual(int_list("2,3, 4"), [2, 3, 4])
        self.assertEqual(float_list("0.5,1e-3"), [0.5, 1e-3])
        self.assertEqual(str_list("sparse, smooth,"), ["sparse", "smooth"])
        with self.assertRaises(argparse.ArgumentTypeError):
            int_list("2,x")

    def test_unset_flags_are_none(self):
        args = self.parser.parse_args(["decompose", "--algo", "hooi", "--ranks", "2,2,2"])
        self.assertEqual(args.ranks, [2, 2, 2])
        self.assertIsNone(args.max_iters)
        self.assertIsNone(args.config)

    def test_dashed_flags_map_to_fields(self):
        args = self.parser.parse_args(["synth", "--kind", "corpus", "--n-test", "5", "--per-class", "4"])
        self.assertEqual((args.n_test, args.per_class), (5, 4))
        self.assertIsNone(args.nonnegative)
        args = self.parser.parse_args(["mbss", "--penalty-weights", "0,0.1", "--max-workers", "2"])
        self.assertEqual(args.penalty_weights, [0.0, 0.1])
        self.assertEqual(args.max_workers, 2)

    def test_linked_inputs(self):
        args = self.parser.parse_args(["linked", "--inputs", "a.tnsr", "b.tnsr", "--common-counts", "1,0"])
        self.assertEqual(args.inputs, ["a.tnsr", "b.tnsr"])
        self.assertEqual(args.common_counts, [1, 0])

    def test_bad_choice_exits_with_usage_code(self):
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                self.parser.parse_args(["decompose", "--algo", "parafac2"])
        self.assertEqual(ctx.exception.code, 2)


class TestExitCodes(unittest.TestCase):

    def test_error_mapping(self):
        try:
            SynthConfig(kind="noise", output="out")
        except ValidationError as e:
            self.assertEqual(exit_code_for(e), (2, "invalid-config"))
        self.assertEqual(exit_code_for(FileNotFoundError("x")), (2, "missing-file"))
        self.assertEqual(exit_code_for(ConfigFileError("x")), (2, "invalid-config"))
        for error_type in ("invalid-mode", "shape", "invalid-rank", "invalid-argument", "invalid-input", "unsupported"):
            self.assertEqual(exit_code_for(TensorError("m", error_type)), (2, error_type))
        for error_type in ("rank-deficient", "io"):
            self.assertEqual(exit_code_for(TensorError("m", error_type)), (1, error_type))
        self.assertEqual(exit_code_for(RuntimeError("boom")), (1, "runtime"))


class TestRunCommand(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.output = os.path.join(self.temp_dir, "out")

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def run_quietly(self, command, flags, config_path=None):
        stderr = io.StringIO()
        with redirect_stderr(stderr):
            code, results = run_command(command, config_path, flags)
        return code, results, stderr.getvalue()

    def test_invalid_config(self):
        code, results, stderr = self.run_quietly("decompose", {"output": self.output, "algo": "cp"})
        self.assertEqual(code, 2)
        self.assertEqual(results["error_type"], "invalid-config")
        self.assertTrue(stderr.startswith("error: invalid-config: "))
        self.assertEqual(len(stderr.strip().splitlines()), 1)

    def test_missing_input(self):
        code, _, stderr = self.run_quietly("decompose", {
            "input": os.path.join(self.temp_dir, "absent.tnsr"), "output": self.output, "ranks": [1, 1]})
        self.assertEqual(code, 2)
        self.assertTrue(stderr.startswith("error: missing-file: "))

    def test_missing_config_file(self):
        code, _, _ = self.run_quietly("synth", {}, config_path=os.path.join(self.temp_dir, "absent.yaml"))
        self.assertEqual(code, 2)

    def test_malformed_config_files(self):
        contents = {"bad.yaml": "ranks: [2, 2\n", "list.yaml": "- 1\n- 2\n", "bad.json": "{\"ranks\": [2,"}
        for name, text in contents.items():
            path = os.path.join(self.temp_dir, name)
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
            with self.subTest(config=name):
                code, results, stderr = self.run_quietly("mbss", {}, config_path=path)
                self.assertEqual(code, 2)
                self.assertEqual(results["error_type"], "invalid-config")
                self.assertTrue(stderr.startswith("error: invalid-config: "))

    def test_rank_too_large(self):
        path = os.path.join(self.temp_dir, "t.tnsr")
        write_tensor(path, np.ones((3, 2, 2)))
        code, results, stderr = self.run_quietly("decompose", {"input": path, "output": self.output,
                                                               "ranks": [2, 3, 1]})
        self.assertEqual(code, 2)
        self.assertEqual(results["error_type"], "invalid-rank")
        self.assertIn("invalid-rank", stderr)

    def test_numerical_failure_exits_one(self):
        write_tensor(os.path.join(self.temp_dir, "x.tnsr"), np.random.default_rng(0).standard_normal((10, 3)))
        write_tensor(os.path.join(self.temp_dir, "y.tnsr"), np.zeros((10, 2)))
        with self.assertLogs('cli.main', level='ERROR'):
            code, results, stderr = self.run_quietly("pls", {
                "model": "matrix", "x": os.path.join(self.temp_dir, "x.tnsr"),
                "y": os.path.join(self.temp_dir, "y.tnsr"), "components": 1, "output": self.output})
        self.assertEqual(code, 1)
        self.assertTrue(stderr.startswith("error: rank-deficient: "))


class TestMain(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_synth_then_decompose(self):
        synth_dir = os.path.join(self.temp_dir, "synth")
        with redirect_stdout(io.StringIO()):
            self.assertEqual(main(["--log-level", "WARNING", "synth", "--kind", "cp", "--output", synth_dir,
                                   "--dims", "5,4,3", "--rank", "2", "--seed", "3"]), 0)
            self.assertEqual(main(["--log-level", "WARNING", "decompose", "--algo", "hosvd",
                                   "--input", os.path.join(synth_dir, "tensor.tnsr"),
                                   "--output", os.path.join(self.temp_dir, "hosvd"), "--ranks", "2,2,2"]), 0)
        self.assertTrue(os.path.exists(os.path.join(synth_dir, "truth", "manifest.txt")))
        self.assertTrue(os.path.exists(os.path.join(self.temp_dir, "hosvd", "report.txt")))

    def test_validation_failure_code(self):
        with redirect_stderr(io.StringIO()) as stderr:
            code = main(["--log-level", "WARNING", "mbss", "--output", self.temp_dir, "--ranks", "2,2"])
        self.assertEqual(code, 2)
        self.assertIn("invalid-config", stderr.getvalue())


if __name__ == '__main__':
    unittest.main()
