import pytest

from confuse_trainer.config import (AdapterConfig, LEARNING_RATE_GRID,
                                    Method, TrainConfig)


def test_defaults_match_published_setup():
    config = TrainConfig(base_model="tiny", method=Method.SFT)
    assert config.epochs == 5
    assert config.adapter.rank == 64
    assert config.adapter.targets == ("q_proj", "k_proj", "v_proj", "o_proj",
                                      "ffn")
    assert config.cutoff_length == 32768
    assert config.precision == "bf16"
    assert config.learning_rate in LEARNING_RATE_GRID


def test_learning_rate_grid_enforced():
    for lr in LEARNING_RATE_GRID:
        TrainConfig(base_model="tiny", method=Method.SFT, learning_rate=lr)
    with pytest.raises(ValueError, match="learning_rate"):
        TrainConfig(base_model="tiny", method=Method.SFT, learning_rate=1e-4)


@pytest.mark.parametrize("method", [Method.ONLINE_DPO, Method.INTERACT_DPO])
def test_env_methods_require_env_url(method):
    with pytest.raises(ValueError, match="env_url"):
        TrainConfig(base_model="tiny", method=method)
    TrainConfig(base_model="tiny", method=method,
                env_url="http://127.0.0.1:9")


def test_offline_methods_need_no_env():
    TrainConfig(base_model="tiny", method=Method.DPO)
    TrainConfig(base_model="tiny", method=Method.SFT)


def test_field_validation():
    with pytest.raises(ValueError):
        TrainConfig(base_model="t", method=Method.SFT, epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(base_model="t", method=Method.SFT, precision="fp16")
    with pytest.raises(ValueError):
        AdapterConfig(rank=0)
    with pytest.raises(ValueError):
        AdapterConfig(targets=())
