import numpy as np
import pytest

from telemscan.model import ChannelSeries


@pytest.fixture
def write_csv(tmp_path):
    def _write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


def make_series(values, channel_id="chan", commands=None) -> ChannelSeries:
    """Contiguous-index channel from a 1-D telemetry vector."""
    values = np.asarray(values, dtype=np.float64)
    cols = [values]
    if commands is not None:
        for cmd in commands:
            cols.append(np.asarray(cmd, dtype=np.float64))
    matrix = np.column_stack(cols)
    return ChannelSeries(channel_id=channel_id,
                         indices=np.arange(len(values)), values=matrix)
