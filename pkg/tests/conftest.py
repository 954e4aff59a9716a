import pytest

from floquet_lab.training import TrainConfig, train


@pytest.fixture(scope="session")
def quick_base_model():
    """Small, briefly trained net for schema and wiring tests."""
    cfg = TrainConfig(hidden_width=16, n_samples=512, epochs=400, seed=0, learning_rate=3e-3)
    return train(cfg).trained_model


@pytest.fixture(scope="session")
def quick_protocol_model():
    cfg = TrainConfig(
        hidden_width=32,
        n_samples=512,
        epochs=300,
        seed=0,
        learning_rate=3e-3,
        offset_c=2.5,
        row_norm_cap=2.0,
        freeze_b1=True,
    )
    return train(cfg).trained_model
