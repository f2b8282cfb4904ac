import logging
import colorlog


LOG_FORMAT = '%(log_color)s%(levelname)s:%(name)s:%(message)s%(reset)s'


class CustomLogger:
    def __init__(self, level: int = logging.INFO):
        self._logger: logging.Logger = logging.getLogger()  # Get the root logger

        # only the first instance installs the colored console handler
        if not any(getattr(h, '_pyihs_console', False) for h in self._logger.handlers):
            self._logger.setLevel(level)

            formatter = colorlog.ColoredFormatter(
                LOG_FORMAT,
                log_colors={
                    'DEBUG': 'cyan',
                    'INFO': 'green',
                    'WARNING': 'yellow',
                    'ERROR': 'red',
                    'CRITICAL': 'red,bg_white',
                }
            )

            console_handler = logging.StreamHandler()
            console_handler.setFormatter(formatter)
            console_handler._pyihs_console = True

            self._logger.addHandler(console_handler)

    def get_logger(self):
        return self._logger

    def set_level(self, level: int) -> None:
        self._logger.setLevel(level)
