#!/usr/bin/env python3
"""
Test that unknown command-line arguments are rejected.
"""
import unittest
from msf_solver.arg_parser import MSFArgumentParser


class TestUnknownArguments(unittest.TestCase):
    """Test unknown argument validation."""

    def setUp(self):
        self.parser = MSFArgumentParser()

    def test_unknown_flag_raises(self):
        with self.assertRaises(ValueError) as ctx:
            self.parser.parse_arguments(["run", "-c", "a.toml", "--cells", "64"])

        error_msg = str(ctx.exception)
        self.assertIn("--cells", error_msg)
        self.assertIn("Unknown argument", error_msg)
        self.assertIn("Tip:", error_msg)

    def test_unknown_short_flag_raises(self):
        with self.assertRaises(ValueError) as ctx:
            self.parser.parse_arguments(["run", "-x"])
        self.assertIn("-x", str(ctx.exception))

    def test_first_unknown_is_reported(self):
        with self.assertRaises(ValueError) as ctx:
            self.parser.parse_arguments(["run", "--unknown1", "val1", "--unknown2", "val2"])
        self.assertIn("--unknown1", str(ctx.exception))
        self.assertNotIn("--unknown2", str(ctx.exception))

    def test_extra_positional_raises(self):
        with self.assertRaises(ValueError) as ctx:
            self.parser.parse_arguments(["run", "configs/mixing.toml"])
        self.assertIn("Unexpected positional argument", str(ctx.exception))

    def test_valid_arguments_pass(self):
        result = self.parser.parse_arguments(["convergence", "-c", "configs/smooth.toml", "-o", "out"])
        self.assertEqual(result["command"], "convergence")


if __name__ == "__main__":
    unittest.main()
