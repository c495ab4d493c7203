import os
from datetime import datetime
import logging
from typing import Optional, Union

from flask import Flask

from .db import db

LOG_FORMAT = "%(asctime)s\t%(name)s\t%(levelname)s\t%(message)s"

# Third-party loggers that flood DEBUG output during training and plotting.
NOISY_LOGGERS = ("matplotlib", "PIL", "torch", "sqlalchemy.engine")


def setup_logging(
    log_dir: Optional[str] = "./logs",
    console_level: Union[int, str] = logging.INFO,
    name: str = "maskfill",
) -> Optional[str]:
    """
    Console handler at `console_level` plus, when `log_dir` is given, a
    DEBUG file `<log_dir>/<name>-<timestamp>.log`. Returns the file path.
    """
    if isinstance(console_level, str):
        console_level = logging.getLevelName(console_level.upper())
    console_handler = logging.StreamHandler()
    console_handler.setLevel(console_level)
    handlers: list[logging.Handler] = [console_handler]
    log_path = None
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        stamp = datetime.now().strftime("%Y-%m-%d-%H-%M-%S")
        log_path = os.path.join(log_dir, f"{name}-{stamp}.log")
        file_handler = logging.FileHandler(log_path)
        file_handler.setLevel(logging.DEBUG)
        handlers.append(file_handler)
    logging.basicConfig(
        level=logging.DEBUG,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    for noisy in NOISY_LOGGERS:
        logging.getLogger(noisy).setLevel(logging.WARNING)
    return log_path


def create_app(config: object):
    """
    Make a Flask app holding the database session used by the
    database event backend.
    """
    logger = logging.getLogger(__name__)

    app = Flask(__name__)
    app.config.from_object(config)

    db.init_app(app)

    with app.app_context():
        db.create_all()
        logger.info("Database tables created.")

    logger.info("Application setup complete.")

    return app
