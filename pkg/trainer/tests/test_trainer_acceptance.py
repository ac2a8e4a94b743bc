"""Cross-component acceptance: exported files must drive the inference engine.

The fast test exercises the full-width generator end to end: train-side
torch forward versus the numpy engine running the exported file.  The
slow test trains a reduced model on a sphere-pack phantom set and checks
the generated morphology statistics against the phantom ensemble.
"""

import os

import numpy as np
import pytest
import torch

from porogen.network import (
    dump_activations,
    generator_forward,
    gray_from_unit,
    synthesize,
)
from porogen.twopoint import ensemble_stats, s2_radial
from porogen.volume import BinaryImage3D, otsu_threshold, segment
from porogen.weights import load_weights, parameter_count

from porotrain import Generator, TrainConfig, export_weights, init_weights, train
from toy_data import PORE_GRAY, phantom_set

GRAY_TOL = 1e-3
N_LATENTS = 5


class TestCrossComponentParity:
    def test_engine_reproduces_torch_forward(self, tmp_path):
        gen = Generator(512, 64)
        init_weights(gen, seed=0)
        # push running statistics off their init values so the exported
        # batchnorm blocks do real normalization work
        gen.train()
        with torch.no_grad():
            for s in (1, 2):
                z = torch.randn(2, 512, 1, 1, 1,
                                generator=torch.Generator().manual_seed(s))
                gen(z)
        gen.eval()

        path = tmp_path / "generator.g3dw"
        export_weights(gen, path)
        w = load_weights(path)
        assert [s.filters for s in w.specs] == [512, 256, 128, 64, 64, 1]
        assert parameter_count(w) == 27_904_001

        g = torch.Generator().manual_seed(42)
        worst = 0.0
        for i in range(N_LATENTS):
            z = torch.randn(1, 512, 1, 1, 1, generator=g)
            with torch.no_grad():
                y_torch = gen(z).numpy()[0, 0]
            y_engine = dump_activations(w, z.numpy()[0])[-1][0]
            worst = max(worst, 127.5 * float(np.max(np.abs(y_torch - y_engine))))
            if i == 0:
                engine_gray = generator_forward(w, z.numpy()[0]).data
                torch_gray = gray_from_unit(y_torch)
                levels = np.abs(engine_gray.astype(np.int16)
                                - torch_gray.astype(np.int16))
                assert int(levels.max()) <= 1
        assert worst < GRAY_TOL
        print(f"PASS cross-component parity: worst forward gap "
              f"{worst:.3e} gray levels < {GRAY_TOL}")


@pytest.mark.slow
class TestToyTraining:
    """Reduced-width adversarial run against a sphere-pack phantom set.

    Takes hours on CPU by design; override POROTRAIN_TOY_EPOCHS to
    shorten exploratory runs.
    """

    def test_generated_morphology_matches_phantoms(self, tmp_path):
        epochs = int(os.environ.get("POROTRAIN_TOY_EPOCHS", "6000"))
        phantoms = phantom_set(32, seed=0)
        cfg = TrainConfig(epochs=epochs, ngf=16, ndf=16, d=512,
                          batch_size=8, export_every=500, seed=5)
        outputs = train(phantoms, cfg, tmp_path)

        w = load_weights(outputs.generator_path)
        gen_phis, gen_curves = [], []
        for i in range(16):
            img = synthesize(w, 64, seed=1000 + i)
            binary = segment(img, otsu_threshold(img))
            gen_phis.append(float(binary.data.mean()))
            gen_curves.append(s2_radial(binary, 16))

        phantom_phis, phantom_curves = [], []
        for v in phantoms:
            binary = BinaryImage3D((v == PORE_GRAY).astype(np.uint8))
            phantom_phis.append(float(binary.data.mean()))
            phantom_curves.append(s2_radial(binary, 16))

        phi_gap = abs(float(np.mean(gen_phis)) - float(np.mean(phantom_phis)))
        assert phi_gap <= 0.05, f"mean porosity off by {phi_gap:.4f} > 0.05"

        band = ensemble_stats(phantom_curves)
        generated = ensemble_stats(gen_curves)
        lo = band.mean - 2.0 * band.std
        hi = band.mean + 2.0 * band.std
        inside = (generated.mean >= lo) & (generated.mean <= hi)
        assert inside.all(), (
            f"S2 leaves the phantom band at lags {band.distances[~inside]}"
        )
        print(f"PASS toy training: porosity gap {phi_gap:.4f} <= 0.05, "
              f"S2 inside the phantom 2-sigma band at all lags <= 16")
