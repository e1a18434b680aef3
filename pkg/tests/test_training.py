import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from deepradar.autodiff.gradcheck import check_gradients
from deepradar.autodiff.tensor import precision
from deepradar.errors import ConfigError, TrainingDivergedError
from deepradar.models.training import TrainConfig
from deepradar.scene.grid import normalize_power
from deepradar.services.nets.radar_model import build_model, load_model
from deepradar.services.training.losses import loss_vae
from deepradar.services.training.trainer import Trainer, epoch_checkpoint_path, train


def config_for(arch, variant, **kwargs):
    kwargs.setdefault("epochs", 2)
    kwargs.setdefault("batch_size", 4)
    return TrainConfig(variant=variant, architecture=arch, **kwargs)


def test_alpha_only_for_mixed_variant():
    with pytest.raises(ValidationError):
        TrainConfig(variant="vae", alpha=0.5)
    with pytest.raises(ValidationError):
        TrainConfig(variant="vae_mixed", alpha=1.5)
    assert TrainConfig(variant="vae_mixed").effective_alpha == 0.99
    assert TrainConfig(variant="vae_adv").effective_alpha == 0.0
    assert TrainConfig(variant="vae").effective_alpha == 1.0


def test_epoch_checkpoint_path():
    assert str(epoch_checkpoint_path("runs/model.drsm", 3)) == "runs/model.epoch0003.drsm"


@pytest.mark.slow
def test_normal_model_memorizes_one_frame(tiny_arch, tiny_dataset):
    frame = tiny_dataset.subset([0])
    result = train(frame, config_for(tiny_arch, "normal", epochs=200, batch_size=1, backtrack_steps=20))
    losses = [record.loss for record in result.log.records]
    assert len(losses) == 200
    assert all(b < a for a, b in zip(losses, losses[1:]))

    batch = frame.batch([0])
    mean = result.model.forward(batch.rasters, batch.objects).mean.data
    target = normalize_power(batch.power, frame.spec)
    assert float(np.mean((mean - target) ** 2)) < 1e-2


def test_guarded_training_loss_strictly_decreases(tiny_arch, tiny_dataset):
    frame = tiny_dataset.subset([1])
    for variant in ("normal", "gmm"):
        result = train(frame, config_for(tiny_arch, variant, epochs=40, batch_size=1, backtrack_steps=20))
        losses = [record.loss for record in result.log.records]
        assert all(b < a for a, b in zip(losses, losses[1:])), variant


def test_guard_restores_parameters_when_nothing_helps(tiny_arch, tiny_grid):
    config = config_for(tiny_arch, "normal", backtrack_steps=3)
    trainer = Trainer(config, build_model("normal", tiny_arch, tiny_grid))
    before = {name: p.data.copy() for name, p in trainer.generator_params.items()}
    for p in trainer.generator_params.values():
        p.grad = np.ones_like(p.data)
    calls = []

    def objective():
        calls.append(1)
        return math.inf

    trainer._guarded_step(0.0, trainer.generator_params, trainer.generator_opt, objective, epoch=1, batch=0)
    assert len(calls) == 4
    assert trainer.rejected_steps == 1
    for name, p in trainer.generator_params.items():
        assert_array_equal(p.data, before[name])


def test_guard_accepts_a_fraction_of_the_update(tiny_arch, tiny_grid):
    config = config_for(tiny_arch, "normal", backtrack_steps=5)
    trainer = Trainer(config, build_model("normal", tiny_arch, tiny_grid))
    name = "head.decoder.hidden.bias"
    param = trainer.generator_params[name]
    start = param.data.copy()
    for p in trainer.generator_params.values():
        p.grad = np.ones_like(p.data)
    results = iter([1.0, 1.0, -1.0])

    trainer._guarded_step(0.0, trainer.generator_params, trainer.generator_opt, lambda: next(results),
                          epoch=1, batch=0)
    # the third trial keeps a quarter of the proposed update
    proposed = -math.sqrt(config.epsilon) / math.sqrt((1.0 - config.rho) + config.epsilon)
    assert_allclose(param.data - start, 0.25 * proposed, rtol=1e-4)
    assert trainer.rejected_steps == 0


def test_training_is_bitwise_deterministic(tmp_path, tiny_arch, tiny_dataset):
    config = config_for(tiny_arch, "gmm", seed=4)
    train(tiny_dataset, config, checkpoint_path=tmp_path / "a.drsm")
    train(tiny_dataset, config, checkpoint_path=tmp_path / "b.drsm")
    assert (tmp_path / "a.drsm").read_bytes() == (tmp_path / "b.drsm").read_bytes()


def test_seed_changes_trajectory(tiny_arch, tiny_dataset):
    a = train(tiny_dataset, config_for(tiny_arch, "normal", seed=1))
    b = train(tiny_dataset, config_for(tiny_arch, "normal", seed=2))
    assert a.log.records[-1].loss != b.log.records[-1].loss


def test_mixed_with_unit_alpha_reproduces_vae(tiny_arch, tiny_dataset):
    vae = train(tiny_dataset, config_for(tiny_arch, "vae", seed=3))
    mixed = train(tiny_dataset, config_for(tiny_arch, "vae_mixed", alpha=1.0, seed=3))
    vae_params = vae.model.generator_parameters()
    mixed_params = mixed.model.generator_parameters()
    assert list(vae_params) == list(mixed_params)
    for name, tensor in vae_params.items():
        assert_array_equal(tensor.data, mixed_params[name].data)
    assert [r.l_vae for r in vae.log.records] == [r.l_vae for r in mixed.log.records]
    # the discriminator still trains alongside
    assert all(r.disc_accuracy is not None for r in mixed.log.records)


def test_adversarial_only_variant(tiny_arch, tiny_dataset):
    result = train(tiny_dataset, config_for(tiny_arch, "vae_adv", discriminator_steps=2))
    for record in result.log.records:
        assert record.l_vae is None
        assert record.l_adv is not None and np.isfinite(record.l_adv)
        assert 0.0 <= record.disc_accuracy <= 1.0
    assert result.checkpoint.metadata.alpha == 0.0


def test_checkpoints_written_every_k_epochs(tmp_path, tiny_arch, tiny_dataset):
    path = tmp_path / "model.drsm"
    result = train(tiny_dataset, config_for(tiny_arch, "vae_mixed", epochs=3, checkpoint_every=2),
                   checkpoint_path=path)
    assert epoch_checkpoint_path(path, 2).exists()
    assert not epoch_checkpoint_path(path, 3).exists()
    model, header = load_model(path)
    assert header.metadata.epochs == 3
    assert header.metadata.dataset_hash == tiny_dataset.fingerprint()
    assert header.metadata.train_config["variant"] == "vae_mixed"
    for name, tensor in result.model.parameters().items():
        assert_array_equal(model.parameters()[name].data, tensor.data)
    _, intermediate = load_model(epoch_checkpoint_path(path, 2))
    assert intermediate.metadata.epochs == 2


def test_log_is_line_json(tiny_arch, tiny_dataset):
    result = train(tiny_dataset, config_for(tiny_arch, "normal", epochs=3))
    lines = result.log.to_jsonl().splitlines()
    assert len(lines) == 4
    header = json.loads(lines[0])
    assert header["event"] == "config"
    assert header["config"]["variant"] == "normal"
    assert [json.loads(line)["epoch"] for line in lines[1:]] == [1, 2, 3]
    frame = result.log.to_frame()
    assert list(frame["epoch"]) == [1, 2, 3]
    assert frame["nll"].notna().all()


def test_non_finite_forward_aborts_training(tiny_arch, tiny_grid, tiny_dataset):
    config = config_for(tiny_arch, "normal")
    model = build_model("normal", tiny_arch, tiny_grid)
    model.parameters()["encoder.raster.0.weight"].data[...] = np.nan
    with pytest.raises(TrainingDivergedError) as info:
        Trainer(config, model).train(tiny_dataset)
    assert info.value.epoch == 1
    assert info.value.batch == 0
    assert info.value.tensor_name in str(info.value)


def test_trainer_rejects_mismatched_variant(tiny_arch, tiny_grid):
    with pytest.raises(ConfigError):
        Trainer(config_for(tiny_arch, "gmm"), build_model("normal", tiny_arch, tiny_grid))


def test_empty_dataset_rejected(tiny_arch, tiny_dataset):
    with pytest.raises(ConfigError):
        train(tiny_dataset.subset([]), config_for(tiny_arch, "normal"))


def test_full_vae_loss_gradient(tiny_arch, tiny_grid, tiny_dataset):
    with precision(np.float64):
        model = build_model("vae", tiny_arch, tiny_grid, seed=0)
        batch = tiny_dataset.batch([0, 1])
        y = normalize_power(batch.power, tiny_grid).astype(np.float64)
        eta = np.random.default_rng(8).standard_normal((2, tiny_arch.d_z))

        def fn():
            x = model.encode(batch.rasters, batch.objects)
            y_hat, latent = model.reconstruct(x, y, eta)
            return loss_vae(y_hat, y, latent)

        params = model.generator_parameters()
        names = [
            "encoder.raster.0.weight",
            "encoder.hidden.weight",
            "recognition.out.weight",
            "recognition.out.bias",
            "decoder.decoder.deconv.0.weight",
        ]
        tensors = [params[name] for name in names]
        assert check_gradients(fn, tensors, h=1e-5, sample=6, rng=np.random.default_rng(2)) <= 1e-3
