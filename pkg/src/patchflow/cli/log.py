"""Line-delimited JSON logging to stderr."""

import json
import logging
import sys


class JsonFormatter(logging.Formatter):
    def format(self, record):
        entry = {
            "level": record.levelname.lower(),
            "module": record.name,
            "message": record.getMessage(),
        }
        if record.__dict__.get("extra_fields"):
            entry.update(record.__dict__["extra_fields"])
        return json.dumps(entry)


def get_logger(module: str) -> logging.Logger:
    logger = logging.getLogger(module)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonFormatter())
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        logger.propagate = False
    return logger


def log_record(logger: logging.Logger, message: str, **fields) -> None:
    logger.info(message, extra={"extra_fields": fields})
