import logging
import sys

from compbias.common.utils.logging_service import DATE_FORMAT, LOG_FORMAT, CustomFormatter, LoggerService


def make_record(name):
    return logging.LogRecord(name, logging.INFO, __file__, 1, "hello", None, None)


def test_formatter_shortens_dotted_names():
    formatter = CustomFormatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    record = make_record("compbias.harness")
    text = formatter.format(record)
    assert "[Harness/INFO]: hello" in text
    assert record.name == "compbias.harness"


def test_formatter_handles_dunder_and_plain_names():
    formatter = CustomFormatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    assert "[MAIN/INFO]" in formatter.format(make_record("__main__"))
    assert "[Controller/INFO]" in formatter.format(make_record("controller"))


def test_service_without_directory_writes_no_files(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    service = LoggerService("compbias")
    assert service.log_filename is None
    assert service.get_logger().name == "compbias"
    assert list(tmp_path.iterdir()) == []


def test_service_with_directory_writes_daily_file(tmp_path):
    service = LoggerService("compbias", log_directory=str(tmp_path / "logs"))
    service.get_logger().info("sweep started")
    for handler in logging.getLogger().handlers:
        handler.flush()
    files = list((tmp_path / "logs").glob("*.log"))
    assert len(files) == 1
    assert "[Compbias/INFO]: sweep started" in files[0].read_text()
    LoggerService("compbias")


def test_exception_hook_logs_uncaught_errors(monkeypatch, caplog):
    monkeypatch.setattr(sys, "excepthook", sys.excepthook)
    service = LoggerService("compbias")
    service.install_exception_hook()
    # the service replaced the root handlers, caplog included
    logging.getLogger().addHandler(caplog.handler)
    with caplog.at_level(logging.ERROR):
        try:
            raise RuntimeError("boom")
        except RuntimeError:
            sys.excepthook(*sys.exc_info())
    assert "Uncaught exception" in caplog.text
