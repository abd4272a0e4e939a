import numpy as np
import pytest

from drivers import ENHANCERS, CausalFirEnhancer, IdentityEnhancer, get_enhancer, reference_enhancer
from features import extract_features
from utils.errors import ConfigError, DataError


def feature_mse(a, b):
    fa, fb = extract_features(a), extract_features(b)
    n = min(fa.frames, fb.frames)
    return float(np.mean((fa.values[:n] - fb.values[:n]) ** 2))


def test_registered_enhancers():
    assert set(ENHANCERS) == {"identity", "causal-fir"}
    assert isinstance(get_enhancer("identity"), IdentityEnhancer)
    assert get_enhancer("causal-fir", p=3).p == 3

    with pytest.raises(ConfigError, match="unknown enhancer 'wpe'"):
        get_enhancer("wpe")


def test_identity_returns_its_input(speech):
    assert reference_enhancer("identity", speech) is speech


def test_causal_fir_must_be_fitted(speech):
    with pytest.raises(DataError, match="must be fitted"):
        reference_enhancer(CausalFirEnhancer(), speech)
    with pytest.raises(DataError):
        CausalFirEnhancer().fit([])


def test_scalar_gain_filters(reverb_corpus):
    enhancer = CausalFirEnhancer(p=0).fit(reverb_corpus[:2])
    frame = enhancer.filters_frame()

    assert len(frame) == 257
    assert (frame["tap_index"] == 0).all()


def test_causal_fir_keeps_length_and_helps(reverb_corpus):
    enhancer = CausalFirEnhancer(p=5).fit(reverb_corpus[:4])

    gains = []
    for reverb, clean in reverb_corpus[4:]:
        enhanced = reference_enhancer(enhancer, reverb)
        assert len(enhanced) == len(reverb)
        assert enhanced.sample_rate == reverb.sample_rate
        gains.append(feature_mse(reverb, clean) - feature_mse(enhanced, clean))

    assert np.mean(gains) > 0

    frame = enhancer.filters_frame()
    assert frame["tap_index"].tolist()[:6] == [0, 1, 2, 3, 4, 5]
