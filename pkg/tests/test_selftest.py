import numpy as np

from nightisp import selftest
from nightisp.wavelet import SubbandSet, dwt2_haar


class TestSuitesPass:
    def test_run_all_green(self):
        results = selftest.run_all()
        assert len(results) == 5
        for r in results:
            assert r.passed, f"{r.name}: {r.first_failure}"
            assert r.cases > 0
            assert r.failures == 0

    def test_suite_names(self):
        names = [r.name for r in selftest.run_all()]
        assert names == [
            "wavelet_perfect_reconstruction",
            "hvi_round_trip",
            "ciede2000_conformance",
            "fdm_oracle_equivalence",
            "alpha_properties",
        ]


class TestFaultInjection:
    # each suite must actually detect a broken implementation, otherwise
    # the selftest command is decorative

    def test_wavelet_detects_sign_flip(self):
        def bad_dwt(plane):
            b = dwt2_haar(plane)
            return SubbandSet(ll=b.ll, lh=-b.lh, hl=b.hl, hh=b.hh)

        result = selftest.wavelet_suite(dwt=bad_dwt, trials=5)
        assert not result.passed
        assert "error" in result.first_failure

    def test_wavelet_detects_energy_leak(self):
        def lossy_idwt(bands):
            from nightisp.wavelet import idwt2_haar

            return idwt2_haar(bands) * 0.999

        result = selftest.wavelet_suite(idwt=lossy_idwt, trials=5)
        assert not result.passed

    def test_hvi_detects_bias(self):
        from nightisp.color_hvi import hvi_to_rgb

        result = selftest.hvi_suite(inverse=lambda img: hvi_to_rgb(img) + 1e-4,
                                    pixels=2000)
        assert not result.passed

    def test_ciede_detects_offset(self):
        from nightisp.metrics import ciede2000

        result = selftest.ciede2000_suite(fn=lambda a, b: ciede2000(a, b) + 2e-4)
        assert not result.passed
        assert result.failures == result.cases

    def test_fdm_detects_unsorted_comparison(self):
        def bad_fdm(f_pred, f_gt):
            gap = np.asarray(f_pred, float) - np.asarray(f_gt, float)
            return float(np.mean(gap * gap))

        result = selftest.fdm_suite(fn=bad_fdm, trials=8)
        assert not result.passed

    def test_alpha_detects_one_sided_ratio(self):
        def bad_alpha(pred, gt):
            return float(np.mean(gt)) / max(float(np.mean(pred)), 1e-6)

        result = selftest.alpha_suite(fn=bad_alpha, trials=20)
        assert not result.passed

    def test_first_failure_recorded_once(self):
        result = selftest.ciede2000_suite(fn=lambda a, b: 0.0)
        assert result.failures > 1
        assert isinstance(result.first_failure, str)
