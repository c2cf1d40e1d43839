import logging

from models.timing import PlanWindow, WindowPlan
from utils.logger import FreeAudioLogger


class Planner:
    def __init__(self, logger):
        self.logger = logger

    def run(self):
        self.logger.info("planning")


def read_log(logger):
    logger.close()
    return logger.log_file.read_text(encoding='utf-8')


def test_log_file_is_created(logger, log_dir):
    assert logger.log_file.parent == log_dir
    assert logger.log_file.name.startswith('freeaudio_') and logger.log_file.suffix == '.log'


def test_messages_carry_the_calling_method(logger):
    Planner(logger).run()
    assert "[Planner.run] planning" in read_log(logger)


def test_level_filtering(log_dir):
    logger = FreeAudioLogger(log_dir=log_dir, log_level=logging.WARNING, name='FreeAudioLevels')
    logger.info("quiet")
    logger.warning("loud")
    text = read_log(logger)
    assert "loud" in text and "quiet" not in text


def test_console_only_logger(tmp_path):
    logger = FreeAudioLogger(log_dir=tmp_path / 'unused', log_to_file=False, name='FreeAudioConsole')
    logger.info("hello")
    logger.close()
    assert logger.log_file is None
    assert not (tmp_path / 'unused').exists()


def test_sensitive_config_values_are_masked(logger):
    logger.log_config({'llm_api_key': 'sk-abcdef123456', 'alpha': 0.2})
    text = read_log(logger)
    assert 'sk-abcdef123456' not in text and '3456' in text
    assert 'alpha: 0.2' in text


def test_plan_and_metrics(logger):
    plan = WindowPlan(10.0, [PlanWindow(0.0, 4.0, ["frying"], "Frying"), PlanWindow(4.0, 10.0, ["rain"], "Rain")],
                      "frying and rain")
    logger.log_plan(plan)
    logger.log_metrics({'eb': 0.5, 'clips': 20}, title="TIMING CONTROL")
    text = read_log(logger)
    assert "WINDOW PLAN (2 windows, 10.00s)" in text
    assert "<4.00,10.00> Rain" in text
    assert "eb: 0.500000" in text and "clips: 20" in text


def test_errors_report_their_category(logger):
    from utils.errors import LlmError
    logger.log_error("plan failed", LlmError("endpoint down"))
    text = read_log(logger)
    assert "Type: LlmError" in text and "Category: external" in text
