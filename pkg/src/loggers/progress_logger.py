import logging
from typing import Optional

from tqdm import tqdm


class ProgressLogger:
    """Progress callback for scans: a tqdm bar on stderr plus a log line every tenth of the way."""

    def __init__(self, show_bar: bool = True, name: str = 'redlab.progress'):
        self.logger = logging.getLogger(name)
        self.show_bar = show_bar
        self._bar: Optional[tqdm] = None
        self._next_log = 0.0

    def __call__(self, data: dict):
        if data.get('error'):
            self.logger.error("%s: %s", data.get('study', 'scan'), data['error'])
        progress = data.get('progress')
        if progress is not None:
            self._update(data, float(progress))
        if data.get('complete'):
            self.close()

    def _update(self, data: dict, progress: float):
        if self.show_bar:
            if self._bar is None:
                self._bar = tqdm(total=100, desc=data.get('study', 'scan'), unit='%', leave=False)
            self._bar.n = round(progress, 1)
            self._bar.refresh()
        if progress >= self._next_log:
            reached = f" (p <= {data['reached']})" if 'reached' in data else ""
            self.logger.info("%s: %.0f%%%s", data.get('study', 'scan'), progress, reached)
            self._next_log = (int(progress // 10) + 1) * 10

    def close(self):
        if self._bar is not None:
            self._bar.close()
            self._bar = None
