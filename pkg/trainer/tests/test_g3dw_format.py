"""Weights-file serializer: framing, validation, and cross-reader identity.

The inference toolkit ships its own reader and writer for the same
format; several tests here use it as the byte-level oracle, so the two
independent implementations stay interchangeable.
"""

import dataclasses
import os
import struct
import zlib

import numpy as np
import pytest

import porogen.weights as engine_weights
from porotrain import (
    Discriminator,
    FormatError,
    Generator,
    ShapeError,
    ValidationError,
    export_weights,
    init_weights,
    weights_file_from_model,
)
from porotrain.g3dw import (
    LayerRecord,
    WeightsFile,
    read_weights_file,
    weights_bytes,
    weights_from_bytes,
    write_weights_file,
)


def conv_record(rng, kind="conv3d", activation="leakyrelu", in_ch=3, filters=5,
                kernel=3, stride=1, padding=1, batchnorm=False, **overrides):
    if kind == "conv3d":
        wshape = (filters, in_ch, kernel, kernel, kernel)
    else:
        wshape = (in_ch, filters, kernel, kernel, kernel)
    fields = {"weight": rng.normal(size=wshape).astype(np.float32)}
    if batchnorm:
        for name in ("gamma", "beta", "running_mean", "running_var"):
            fields[name] = rng.normal(size=filters).astype(np.float32)
    else:
        fields["bias"] = rng.normal(size=filters).astype(np.float32)
    fields.update(overrides)
    return LayerRecord(
        kind=kind, activation=activation, in_channels=in_ch, filters=filters,
        kernel=kernel, stride=stride, padding=padding,
        has_batchnorm=batchnorm, has_bias=not batchnorm, **fields,
    )


@pytest.fixture
def small_file():
    rng = np.random.default_rng(17)
    layers = (
        conv_record(rng, in_ch=1, filters=4, batchnorm=False),
        conv_record(rng, kind="convtransp3d", activation="tanh",
                    in_ch=4, filters=2, kernel=4, stride=2, batchnorm=True),
    )
    return WeightsFile("discriminator", 8, 0.2, 1e-5, layers)


def recompute_crc(buf: bytes) -> bytes:
    body = buf[:-4]
    return body + struct.pack("<I", zlib.crc32(body))


class TestRoundTrip:
    def test_file_roundtrip_preserves_everything(self, small_file, tmp_path):
        path = tmp_path / "w.g3dw"
        write_weights_file(small_file, path)
        back = read_weights_file(path)
        assert back.component == small_file.component
        assert back.d == small_file.d
        assert back.leaky_slope == np.float32(small_file.leaky_slope)
        assert back.bn_eps == np.float32(small_file.bn_eps)
        assert len(back.layers) == 2
        for a, b in zip(small_file.layers, back.layers):
            assert (a.kind, a.activation, a.in_channels, a.filters) == \
                (b.kind, b.activation, b.in_channels, b.filters)
            assert (a.kernel, a.stride, a.padding) == (b.kernel, b.stride, b.padding)
            np.testing.assert_array_equal(a.weight, b.weight)
            for va, vb in zip(a.vectors, b.vectors):
                np.testing.assert_array_equal(va, vb)

    def test_bytes_roundtrip(self, small_file):
        back = weights_from_bytes(weights_bytes(small_file))
        assert back.component == "discriminator"
        np.testing.assert_array_equal(back.layers[0].weight,
                                      small_file.layers[0].weight)

    def test_non_finite_values_survive(self, small_file):
        # a diagnostic checkpoint written after divergence may carry nan/inf
        poisoned = dataclasses.replace(
            small_file.layers[0],
            weight=np.full_like(small_file.layers[0].weight, np.nan),
        )
        wf = WeightsFile("discriminator", 8, 0.2, 1e-5,
                         (poisoned, small_file.layers[1]))
        back = weights_from_bytes(weights_bytes(wf))
        assert np.isnan(back.layers[0].weight).all()


class TestFraming:
    def test_crc_detects_corruption(self, small_file):
        buf = bytearray(weights_bytes(small_file))
        buf[len(buf) // 2] ^= 0xFF
        with pytest.raises(FormatError, match="checksum"):
            weights_from_bytes(bytes(buf))

    def test_truncated_rejected(self, small_file):
        buf = weights_bytes(small_file)
        with pytest.raises(FormatError):
            weights_from_bytes(buf[:-9])

    def test_too_short_rejected(self):
        with pytest.raises(FormatError, match="too short"):
            weights_from_bytes(b"G3D")

    def test_bad_magic(self, small_file):
        buf = bytearray(weights_bytes(small_file))
        buf[:4] = b"NOPE"
        with pytest.raises(FormatError, match="magic"):
            weights_from_bytes(recompute_crc(bytes(buf)))

    def test_unsupported_version(self, small_file):
        buf = bytearray(weights_bytes(small_file))
        struct.pack_into("<I", buf, 4, 9)
        with pytest.raises(FormatError, match="version"):
            weights_from_bytes(recompute_crc(bytes(buf)))

    def test_unknown_component_code(self, small_file):
        buf = bytearray(weights_bytes(small_file))
        buf[20] = 7  # component byte sits after magic, version, d, two f32s
        with pytest.raises(FormatError, match="component"):
            weights_from_bytes(recompute_crc(bytes(buf)))

    def test_unknown_kind_code(self, small_file):
        buf = bytearray(weights_bytes(small_file))
        buf[25] = 9  # first layer record starts right after the 25-byte header
        with pytest.raises(FormatError, match="kind"):
            weights_from_bytes(recompute_crc(bytes(buf)))

    def test_unknown_flag_bits(self, small_file):
        buf = bytearray(weights_bytes(small_file))
        buf[27] |= 4
        with pytest.raises(FormatError, match="flags"):
            weights_from_bytes(recompute_crc(bytes(buf)))

    def test_trailing_bytes_rejected(self, small_file):
        buf = weights_bytes(small_file)
        padded = buf[:-4] + b"\x00" * 3
        with pytest.raises(FormatError, match="trailing"):
            weights_from_bytes(recompute_crc(padded + b"\x00" * 4))


class TestRecordValidation:
    def test_bias_and_batchnorm_flags_exclusive(self):
        rng = np.random.default_rng(0)
        base = conv_record(rng)
        for flags in ((True, True), (False, False)):
            with pytest.raises(ValidationError, match="exactly one"):
                dataclasses.replace(base, has_batchnorm=flags[0], has_bias=flags[1])

    def test_unexpected_vector_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError, match="unexpected bias"):
            conv_record(rng, batchnorm=True, bias=np.zeros(5, dtype=np.float32))

    def test_missing_vector(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError, match="lacks"):
            conv_record(rng, batchnorm=True, gamma=None)

    def test_wrong_weight_shape(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ShapeError, match="weight"):
            conv_record(rng, weight=np.zeros((5, 3, 3, 3), dtype=np.float32))

    def test_wrong_vector_shape(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ShapeError, match="bias"):
            conv_record(rng, bias=np.zeros(2, dtype=np.float32))

    def test_unknown_kind(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError, match="kind"):
            conv_record(rng, kind="conv2d")

    def test_unknown_activation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError, match="activation"):
            conv_record(rng, activation="relu")

    def test_nonpositive_dimension(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError, match="positive"):
            conv_record(rng, stride=0)

    def test_file_needs_layers(self):
        with pytest.raises(ValidationError, match="at least one"):
            WeightsFile("generator", 8, 0.2, 1e-5, ())

    def test_file_rejects_bad_component(self, small_file):
        with pytest.raises(ValidationError, match="component"):
            WeightsFile("critic", 8, 0.2, 1e-5, small_file.layers)


class TestAtomicWrite:
    def test_no_temp_litter(self, small_file, tmp_path):
        path = tmp_path / "w.g3dw"
        write_weights_file(small_file, path)
        assert sorted(os.listdir(tmp_path)) == ["w.g3dw"]

    def test_overwrite_replaces_content(self, small_file, tmp_path):
        path = tmp_path / "w.g3dw"
        path.write_bytes(b"stale")
        write_weights_file(small_file, path)
        assert read_weights_file(path).d == 8


def as_engine_weights(wf: WeightsFile):
    """Rebuild the same parameters through the inference engine's classes."""
    if wf.component == "generator":
        specs = engine_weights.generator_layer_specs(wf.d, wf.layers[3].filters)
    else:
        specs = engine_weights.discriminator_layer_specs(wf.layers[0].filters)
    params = []
    for rec in wf.layers:
        fields = {"weight": rec.weight}
        if rec.has_bias:
            fields["bias"] = rec.bias
        else:
            fields.update(gamma=rec.gamma, beta=rec.beta,
                          running_mean=rec.running_mean,
                          running_var=rec.running_var)
        params.append(engine_weights.LayerParams(**fields))
    return engine_weights.NetworkWeights(
        wf.component, wf.d, wf.leaky_slope, wf.bn_eps, tuple(specs), tuple(params)
    )


class TestCrossImplementation:
    @pytest.mark.parametrize("component", ["generator", "discriminator"])
    def test_serialized_bytes_match_engine_exactly(self, component):
        if component == "generator":
            model = Generator(8, 2)
        else:
            model = Discriminator(2)
        init_weights(model, seed=5)
        wf = weights_file_from_model(model, latent_channels=8)
        assert weights_bytes(wf) == engine_weights.weights_to_bytes(
            as_engine_weights(wf)
        )

    def test_reads_engine_written_file(self, tmp_path):
        w = engine_weights.random_weights("generator", seed=3, d=8, base_filters=2)
        path = tmp_path / "engine.g3dw"
        engine_weights.save_weights(w, path)
        wf = read_weights_file(path)
        assert wf.component == "generator"
        assert wf.d == 8
        assert [rec.filters for rec in wf.layers] == [16, 8, 4, 2, 2, 1]
        for spec, params, rec in zip(w.specs, w.params, wf.layers):
            assert rec.kind == spec.kind
            np.testing.assert_array_equal(rec.weight, params.weight)

    def test_engine_loads_our_file(self, tmp_path):
        gen = Generator(8, 2)
        init_weights(gen, seed=9)
        path = tmp_path / "ours.g3dw"
        export_weights(gen, path)
        w = engine_weights.load_weights(path)
        assert w.component == "generator"
        np.testing.assert_array_equal(
            w.params[0].weight, gen.convs[0].weight.detach().numpy()
        )

    def test_parameter_count_matches_engine(self, tmp_path):
        gen = Generator(8, 2)
        init_weights(gen, seed=1)
        wf = weights_file_from_model(gen)
        path = tmp_path / "count.g3dw"
        write_weights_file(wf, path)
        assert wf.n_parameters == engine_weights.parameter_count(
            engine_weights.load_weights(path)
        )
