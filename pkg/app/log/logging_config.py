import sys
from logging.config import dictConfig
from typing import Optional

from app.core.config import settings


def setup_logging(level: Optional[str] = None):
    level = (level or settings.LOG_LEVEL).upper()
    LOGGING_CONFIG = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "format": "[%(asctime)s] [%(levelname)s] %(name)s - %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S"
            },
        },
        "handlers": {
            # stdoutは結果出力(JSON/CSV)に使うのでログはstderrへ
            "default": {
                "level": level,
                "formatter": "default",
                "class": "logging.StreamHandler",
                "stream": sys.stderr,
            },
        },
        "loggers": {
            "swn": {  # アプリケーション固有のロガー
                "handlers": ["default"],
                "level": level,
                "propagate": False,
            },
            "app": {
                "handlers": ["default"],
                "level": level,
                "propagate": False,
            },
        },
        "root": {
            "handlers": ["default"],
            "level": "WARNING",
        },
    }
    dictConfig(LOGGING_CONFIG)
