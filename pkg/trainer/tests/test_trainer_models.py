"""Torch model families: shapes, init, export checks, reload fidelity."""

import dataclasses

import numpy as np
import pytest
import torch
from torch import nn

from porotrain import (
    Discriminator,
    ExportError,
    Generator,
    ValidationError,
    export_weights,
    init_weights,
    load_model,
    model_from_weights_file,
    round_trip_parity,
    weights_file_from_model,
)
from porotrain.g3dw import WeightsFile


def small_generator(seed=5):
    gen = Generator(8, 2)
    init_weights(gen, seed=seed)
    return gen


def small_discriminator(seed=6):
    disc = Discriminator(2)
    init_weights(disc, seed=seed)
    return disc


class TestShapes:
    def test_generator_edge_law(self):
        gen = small_generator().eval()
        with torch.no_grad():
            out = gen(torch.zeros(2, 8, 1, 1, 1))
        assert out.shape == (2, 1, 64, 64, 64)

    def test_generator_anisotropic_latent(self):
        gen = small_generator().eval()
        with torch.no_grad():
            out = gen(torch.zeros(1, 8, 2, 1, 1))
        assert out.shape == (1, 1, 80, 64, 64)

    def test_generator_output_range(self):
        gen = small_generator().eval()
        with torch.no_grad():
            out = gen(torch.randn(1, 8, 1, 1, 1,
                                  generator=torch.Generator().manual_seed(0)))
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_discriminator_head(self):
        disc = small_discriminator().eval()
        x = torch.randn(2, 1, 64, 64, 64,
                        generator=torch.Generator().manual_seed(1))
        with torch.no_grad():
            logits = disc.forward_logits(x)
            prob = disc(x)
        assert logits.shape == (2, 1, 1, 1, 1)
        assert torch.equal(prob, torch.sigmoid(logits))
        assert prob.min() > 0 and prob.max() < 1

    def test_bad_widths_rejected(self):
        with pytest.raises(ValidationError):
            Generator(0, 2)
        with pytest.raises(ValidationError):
            Generator(8, 0)
        with pytest.raises(ValidationError):
            Discriminator(0)

    def test_filter_progression(self):
        gen = Generator(8, 2)
        disc = Discriminator(2)
        assert [c.out_channels for c in gen.convs] == [16, 8, 4, 2, 2, 1]
        assert [c.out_channels for c in disc.convs] == [2, 4, 8, 16, 1]


class TestInit:
    def test_same_seed_same_weights(self):
        a, b = small_generator(3), small_generator(3)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_different_seed_differs(self):
        a, b = small_generator(3), small_generator(4)
        assert not torch.equal(a.convs[0].weight, b.convs[0].weight)

    def test_init_structure(self):
        gen = small_generator()
        # layer 6 carries the only conv bias; batchnorm shifts start at zero
        assert torch.equal(gen.convs[5].bias, torch.zeros(1))
        for norm in list(gen.norms)[:5]:
            assert torch.equal(norm.bias, torch.zeros(norm.num_features))
            assert torch.equal(norm.running_mean, torch.zeros(norm.num_features))
            assert torch.equal(norm.running_var, torch.ones(norm.num_features))

    def test_init_scale(self):
        # wide layer so the sample std is tight around the target 0.02
        gen = Generator(64, 16)
        init_weights(gen, seed=0)
        std = float(gen.convs[0].weight.detach().std())
        assert 0.015 < std < 0.025


class TestExport:
    def test_roundtrip_forward_identical(self, tmp_path):
        gen = small_generator()
        # move the running statistics off their init values first
        gen.train()
        with torch.no_grad():
            gen(torch.randn(2, 8, 1, 1, 1,
                            generator=torch.Generator().manual_seed(2)))
        gen.eval()
        path = tmp_path / "g.g3dw"
        export_weights(gen, path)
        back = load_model(path)
        assert isinstance(back, Generator)
        assert not back.training
        z = torch.randn(1, 8, 1, 1, 1, generator=torch.Generator().manual_seed(3))
        with torch.no_grad():
            assert torch.equal(gen(z), back(z))

    def test_discriminator_roundtrip(self, tmp_path):
        disc = small_discriminator()
        path = tmp_path / "d.g3dw"
        export_weights(disc, path, latent_channels=8)
        back = load_model(path)
        assert isinstance(back, Discriminator)
        x = torch.randn(1, 1, 64, 64, 64,
                        generator=torch.Generator().manual_seed(4))
        with torch.no_grad():
            assert torch.equal(disc.eval()(x), back(x))

    def test_round_trip_parity_is_exact_in_process(self, tmp_path):
        gen = small_generator()
        path = tmp_path / "g.g3dw"
        export_weights(gen, path)
        assert round_trip_parity(gen, path) == 0.0

    def test_foreign_module_rejected(self, tmp_path):
        with pytest.raises(ExportError, match="fixed"):
            export_weights(nn.Conv3d(1, 1, 3), tmp_path / "x.g3dw")

    def test_swapped_layer_kind_rejected(self, tmp_path):
        gen = small_generator()
        conv = gen.convs[2]
        gen.convs[2] = nn.Conv3d(conv.in_channels, conv.out_channels, 4, 2, 1,
                                 bias=False)
        with pytest.raises(ExportError, match="layer 3"):
            export_weights(gen, tmp_path / "x.g3dw")

    def test_mutated_geometry_rejected(self, tmp_path):
        disc = small_discriminator()
        disc.convs[4] = nn.Conv3d(16, 1, 3, 1, 0)
        with pytest.raises(ExportError, match="geometry"):
            export_weights(disc, tmp_path / "x.g3dw")

    def test_extra_layer_rejected(self, tmp_path):
        disc = small_discriminator()
        disc.convs.append(nn.Conv3d(1, 1, 1))
        disc.norms.append(nn.Identity())
        with pytest.raises(ExportError, match="5 layers"):
            export_weights(disc, tmp_path / "x.g3dw")

    def test_latent_channel_mismatch_rejected(self, tmp_path):
        gen = small_generator()
        with pytest.raises(ExportError, match="latent_channels"):
            export_weights(gen, tmp_path / "x.g3dw", latent_channels=16)


class TestLoadValidation:
    def test_off_family_activation_rejected(self, tmp_path):
        gen = small_generator()
        wf = weights_file_from_model(gen)
        layers = list(wf.layers)
        layers[-1] = dataclasses.replace(layers[-1], activation="sigmoid")
        crooked = WeightsFile(wf.component, wf.d, wf.leaky_slope, wf.bn_eps,
                              tuple(layers))
        with pytest.raises(ValidationError, match="fixed family"):
            model_from_weights_file(crooked)

    def test_truncated_family_rejected(self):
        gen = small_generator()
        wf = weights_file_from_model(gen)
        head_only = WeightsFile(wf.component, wf.d, wf.leaky_slope, wf.bn_eps,
                                wf.layers[:2])
        with pytest.raises(ValidationError):
            model_from_weights_file(head_only)

    def test_file_metadata_carried_over(self, tmp_path):
        gen = Generator(8, 2, leaky_slope=0.3, bn_eps=2e-4)
        init_weights(gen, seed=7)
        path = tmp_path / "g.g3dw"
        export_weights(gen, path)
        back = load_model(path)
        assert back.leaky_slope == pytest.approx(0.3)
        assert back.bn_eps == pytest.approx(2e-4)
        assert back.norms[0].eps == pytest.approx(2e-4)
