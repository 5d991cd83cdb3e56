#!/usr/bin/env python3
"""
Unit tests for the TNSR format, manifests, model directories and corpus manifests.
"""

import os
import shutil
import struct
import sys
import tempfile
import unittest

import numpy as np

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.linked import btd_average
from core.mpls import pls_fit, pls_predict, tensor_pls_fit, tensor_pls_predict
from core.synthetic import coupled_tensor_pair, pls_latent, random_cp, random_tucker
from core.tensor_core import DenseTensor
from core.tucker import bod_decompose, cp_als, hooi
from core.types import TensorError
from tensor_io import (
    load_cp_model,
    load_pls_model,
    load_tensor_pls_model,
    load_tucker_model,
    read_corpus_manifest,
    read_manifest,
    read_tensor,
    save_averaged_block_model,
    save_block_model,
    save_cp_model,
    save_pls_model,
    save_tensor_pls_model,
    save_tucker_model,
    write_corpus_manifest,
    write_manifest,
    write_tensor,
)
from tensor_io.tensor_io import parse_floats, parse_ints


class TempDirTestCase(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def path(self, *parts):
        return os.path.join(self.temp_dir, *parts)


class TestTnsrFormat(TempDirTestCase):

    def test_byte_layout(self):
        path = self.path("small.tnsr")
        write_tensor(path, DenseTensor.from_flat((2, 3), range(6)))
        with open(path, "rb") as f:
            raw = f.read()
        self.assertEqual(raw[:4], b"TNSR")
        self.assertEqual(raw[4], 1)
        self.assertEqual(struct.unpack("<3I", raw[5:17]), (2, 2, 3))
        self.assertEqual(struct.unpack("<6d", raw[17:]), (0.0, 1.0, 2.0, 3.0, 4.0, 5.0))

    def test_write_then_read_is_exact(self):
        t = np.random.default_rng(0).standard_normal((3, 1, 4, 2))
        write_tensor(self.path("t.tnsr"), t)
        np.testing.assert_array_equal(read_tensor(self.path("t.tnsr")).data, t)

    def test_vector_and_matrix(self):
        write_tensor(self.path("v.tnsr"), np.array([1.5, -2.0]))
        self.assertEqual(read_tensor(self.path("v.tnsr")).dims, (2,))

    def test_creates_parent_directories(self):
        path = self.path("nested", "deeper", "t.tnsr")
        write_tensor(path, np.arange(6.0).reshape(2, 3))
        np.testing.assert_array_equal(read_tensor(path).data, np.arange(6.0).reshape(2, 3))

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_tensor(self.path("absent.tnsr"))

    def write_raw(self, name, raw):
        with open(self.path(name), "wb") as f:
            f.write(raw)
        return self.path(name)

    def assert_io_error(self, path):
        with self.assertRaises(TensorError) as ctx:
            read_tensor(path)
        self.assertEqual(ctx.exception.error_type, "io")

    def test_bad_magic(self):
        self.assert_io_error(self.write_raw("bad.tnsr", b"XNSR\x01" + struct.pack("<2I", 1, 1) + struct.pack("<d", 0)))

    def test_bad_version(self):
        self.assert_io_error(self.write_raw("v2.tnsr", b"TNSR\x02" + struct.pack("<2I", 1, 1) + struct.pack("<d", 0)))

    def test_truncated_values(self):
        self.assert_io_error(self.write_raw("short.tnsr", b"TNSR\x01" + struct.pack("<3I", 2, 2, 2) + struct.pack("<3d", 0, 0, 0)))

    def test_trailing_bytes(self):
        self.assert_io_error(self.write_raw("long.tnsr", b"TNSR\x01" + struct.pack("<2I", 1, 1) + struct.pack("<2d", 0, 0)))

    def test_short_header(self):
        self.assert_io_error(self.write_raw("tiny.tnsr", b"TNS"))


class TestManifest(TempDirTestCase):

    def test_values_are_formatted(self):
        path = self.path("manifest.txt")
        write_manifest(path, {"order": 3, "ranks": [2, 2, 1], "fit_error": 0.1, "seed": None, "flag": True})
        with open(path, "rb") as f:
            text = f.read().decode("utf-8")
        self.assertEqual(text, "order=3\nranks=2,2,1\nfit_error=0.1\nseed=none\nflag=true\n")

    def test_read_skips_comments_and_keeps_equals(self):
        path = self.path("manifest.txt")
        with open(path, "w", encoding="utf-8") as f:
            f.write("# comment\n\nkey=a=b\nother = 1\n")
        self.assertEqual(read_manifest(path), {"key": "a=b", "other": " 1"})

    def test_float_repr_is_exact(self):
        path = self.path("manifest.txt")
        value = 0.1 + 0.2
        write_manifest(path, {"x": value, "xs": np.array([value, 1e-300])})
        entries = read_manifest(path)
        self.assertEqual(float(entries["x"]), value)
        self.assertEqual(parse_floats(entries["xs"]), [value, 1e-300])

    def test_malformed_line(self):
        path = self.path("manifest.txt")
        with open(path, "w", encoding="utf-8") as f:
            f.write("no separator\n")
        with self.assertRaises(TensorError) as ctx:
            read_manifest(path)
        self.assertEqual(ctx.exception.error_type, "io")

    def test_parse_helpers(self):
        self.assertEqual(parse_ints("2,3,4"), [2, 3, 4])
        self.assertEqual(parse_ints(""), [])
        self.assertEqual(parse_floats("1.5,-2"), [1.5, -2.0])


class TestModelDirectories(TempDirTestCase):

    def test_tucker_model(self):
        t, _ = random_tucker((5, 4, 3), (2, 2, 2), seed=1, noise=0.1)
        model = hooi(t, [2, 2, 2])
        model.seed = 4
        save_tucker_model(self.path("tucker"), model)
        loaded = load_tucker_model(self.path("tucker"))
        np.testing.assert_array_equal(loaded.core.data, model.core.data)
        for a, b in zip(loaded.factors, model.factors):
            np.testing.assert_array_equal(a, b)
        self.assertEqual(loaded.fit_error, model.fit_error)
        self.assertEqual(loaded.trace, model.trace)
        self.assertEqual((loaded.algorithm, loaded.seed), ("hooi", 4))
        entries = read_manifest(self.path("tucker", "manifest.txt"))
        self.assertEqual(parse_ints(entries["ranks"]), [2, 2, 2])
        self.assertEqual(entries["order"], "3")

    def test_cp_model(self):
        t, _ = random_cp((4, 3, 3), 2, seed=2)
        model = cp_als(t, 2, seed=5)
        save_cp_model(self.path("cp"), model)
        loaded = load_cp_model(self.path("cp"))
        np.testing.assert_array_equal(loaded.weights, model.weights)
        self.assertEqual(loaded.seed, 5)
        self.assertEqual(loaded.warnings, model.warnings)

    def test_block_models(self):
        rng = np.random.default_rng(3)
        save_block_model(self.path("bod"), bod_decompose(rng.standard_normal((4, 3, 3)), [1, 2, 1], max_iters=5))
        entries = read_manifest(self.path("bod", "manifest.txt"))
        self.assertEqual(parse_ints(entries["modes"]), [0, 1, 2])
        self.assertEqual(parse_ints(entries["ranks"]), [1, 2, 1])
        self.assertTrue(os.path.exists(self.path("bod", "block_1_factor.tnsr")))

        xs = [rng.standard_normal((4, 3, 3)) for _ in range(2)]
        save_averaged_block_model(self.path("btd"), btd_average(xs, [1, 1, 1], max_iters=5))
        self.assertEqual(read_manifest(self.path("btd", "manifest.txt"))["blocks"], "2")
        self.assertEqual(load_tucker_model(self.path("btd", "block_1")).ranks, (1, 1, 1))

    def test_pls_model(self):
        x, y, x_test, _ = pls_latent(40, 5, 2, 2, noise=0.1, seed=4, n_test=5)
        model = pls_fit(x, y, 2)
        save_pls_model(self.path("pls"), model)
        loaded = load_pls_model(self.path("pls"))
        np.testing.assert_array_equal(pls_predict(loaded, x_test), pls_predict(model, x_test))

    def test_tensor_pls_model(self):
        x, y, x_test, _, _ = coupled_tensor_pair(30, [4, 3], [3], [2, 2, 2], [2, 2], noise=0.05, seed=5, n_test=4)
        model = tensor_pls_fit(x, y, [2, 2, 2], [2, 2], max_iters=20)
        save_tensor_pls_model(self.path("tpls"), model)
        loaded = load_tensor_pls_model(self.path("tpls"))
        self.assertIs(loaded.y_model.factors[0], loaded.x_model.factors[0])
        self.assertEqual(loaded.shared_modes, [0])
        np.testing.assert_array_equal(tensor_pls_predict(loaded, x_test).data, tensor_pls_predict(model, x_test).data)

    def test_wrong_model_type(self):
        write_manifest(self.path("manifest.txt"), {"type": "tucker"})
        with self.assertRaises(TensorError) as ctx:
            load_pls_model(self.temp_dir)
        self.assertEqual(ctx.exception.error_type, "io")

    def test_missing_required_entry(self):
        os.makedirs(self.path("broken"))
        write_manifest(self.path("broken", "manifest.txt"), {"type": "tucker"})
        with self.assertRaises(TensorError) as ctx:
            load_tucker_model(self.path("broken"))
        self.assertEqual(ctx.exception.error_type, "io")


class TestCorpusManifest(TempDirTestCase):

    def test_relative_paths_resolve_against_manifest(self):
        os.makedirs(self.path("data"))
        write_tensor(self.path("data", "a.tnsr"), np.ones((2, 2)))
        write_tensor(self.path("data", "b.tnsr"), np.zeros((2, 2)))
        write_corpus_manifest(self.path("data", "train.csv"), [("a.tnsr", 0), ("b.tnsr", 1)])
        corpus = read_corpus_manifest(self.path("data", "train.csv"))
        self.assertEqual(corpus.labels, [0, 1])
        self.assertEqual(corpus.samples[0][0, 0], 1.0)
        with open(self.path("data", "train.csv"), encoding="utf-8") as f:
            self.assertEqual(f.readline(), "path,label\n")

    def test_missing_columns(self):
        with open(self.path("bad.csv"), "w", encoding="utf-8") as f:
            f.write("file,class\nx.tnsr,0\n")
        with self.assertRaises(TensorError) as ctx:
            read_corpus_manifest(self.path("bad.csv"))
        self.assertEqual(ctx.exception.error_type, "io")

    def test_missing_manifest_and_sample(self):
        with self.assertRaises(FileNotFoundError):
            read_corpus_manifest(self.path("absent.csv"))
        write_corpus_manifest(self.path("dangling.csv"), [("nowhere.tnsr", 0)])
        with self.assertRaises(FileNotFoundError):
            read_corpus_manifest(self.path("dangling.csv"))


if __name__ == '__main__':
    unittest.main()
