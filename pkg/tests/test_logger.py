import logging
import os
import tempfile
import unittest
from unittest.mock import patch

from msf_solver.logger import LOG_FILE_NAME, LogSettings, StepLogAdapter, setup_logger


class TestLogSettings(unittest.TestCase):
    def test_environment_level_and_dir(self):
        with patch.dict(os.environ, {"MSF_LOG_LEVEL": "warning", "MSF_LOG_DIR": "/tmp/msf-logs"}):
            settings = LogSettings.from_env()
        self.assertEqual(settings.level, "WARNING")
        self.assertEqual(settings.numeric_level, logging.WARNING)
        self.assertEqual(settings.log_dir, "/tmp/msf-logs")

    def test_verbose_overrides_environment(self):
        with patch.dict(os.environ, {"MSF_LOG_LEVEL": "ERROR"}):
            self.assertEqual(LogSettings.from_env(verbose=True).level, "DEBUG")

    def test_unknown_level_falls_back_to_info(self):
        self.assertEqual(LogSettings(level="CHATTY").numeric_level, logging.INFO)


class TestSetupLogger(unittest.TestCase):
    name = "msf_solver.test_logger"

    def tearDown(self):
        logger = logging.getLogger(self.name)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

    def test_reconfiguring_replaces_handlers(self):
        setup_logger(LogSettings(log_to_file=False), name=self.name)
        with tempfile.TemporaryDirectory() as tmp:
            logger = setup_logger(LogSettings(log_dir=tmp), name=self.name)
            self.assertEqual(len(logger.handlers), 2)
            logger.debug("newton detail")
            for handler in logger.handlers:
                handler.flush()
            with open(os.path.join(tmp, LOG_FILE_NAME), encoding="utf-8") as f:
                self.assertIn("newton detail", f.read())
            self.tearDown()

    def test_console_only(self):
        logger = setup_logger(LogSettings(level="ERROR", log_to_file=False), name=self.name)
        self.assertEqual(len(logger.handlers), 1)
        self.assertEqual(logger.level, logging.ERROR)
        self.assertFalse(logger.propagate)


class TestStepLogAdapter(unittest.TestCase):
    def test_prefix(self):
        adapter = StepLogAdapter(logging.getLogger("msf_solver.test_adapter"), {"step": 3, "t": 0.0025})
        msg, _ = adapter.process("entropy_balance gate failed", {})
        self.assertEqual(msg, "[step 3, t=0.0025] entropy_balance gate failed")


if __name__ == "__main__":
    unittest.main()
