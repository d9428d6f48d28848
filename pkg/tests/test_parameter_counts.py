"""Regression lock: parameter counts are a pure function of the config."""

import pytest

from styleattn.generator import build, preset

LOCKED_COUNTS = {
    "cifar10": 20_871_696,
    "stl10": 11_465_934,
    "celeba": 10_941_905,
    "celeba-lin": 12_252_625,
    "church-lin": 17_614_869,
    "clevr-hybrid": 14_883_996,
    "cityscapes-hybrid": 14_883_996,
    "afhq-cat-hybrid": 14_653_441,
    "ablation-small": 1_824_574,
    "toy8": 23_972,
    "toy16": 83_016,
}


@pytest.mark.parametrize("name,count", sorted(LOCKED_COUNTS.items()))
def test_locked_parameter_count(name, count):
    assert build(preset(name), seed=123).parameter_count() == count
