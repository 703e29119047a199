
import numpy as np
import pytest

from layout_metrics import (
    LayoutCollection,
    PerturbConfig,
    kendall_tau,
    ltsim_emd,
    measure_correlation,
    perturb,
    retrieve,
    save_collection,
)
from layout_metrics.errors import (
    AllTiedError,
    LengthMismatchError,
    MultisetPrecheckFailedError,
    UnknownMeasureError,
    VocabularyTooSmallError,
)

from conftest import layout, random_collection, random_layout


def brute_force_tau_b(a, b):
    """Independent tau-b oracle: O(n^2) concordant/discordant pair counting."""
    n = len(a)
    concordant = discordant = ties_a = ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da, db = a[i] - a[j], b[i] - b[j]
            if da == 0 and db == 0:
                continue
            if da == 0:
                ties_a += 1
            elif db == 0:
                ties_b += 1
            elif (da > 0) == (db > 0):
                concordant += 1
            else:
                discordant += 1
    denom = ((concordant + discordant + ties_a) * (concordant + discordant + ties_b)) ** 0.5
    return (concordant - discordant) / denom


# ---------------------------------------------------------------- perturb

def test_perturb_config_validation():
    with pytest.raises(ValueError):
        PerturbConfig(rate=1.5, kind="positional")
    with pytest.raises(ValueError):
        PerturbConfig(rate=0.5, kind="rotate")
    with pytest.raises(ValueError):
        PerturbConfig(rate=0.5, kind="label", max_offset=-0.1)
    with pytest.raises(ValueError):
        PerturbConfig(rate=0.5, kind="label", seed=-3)


def test_perturb_rate_zero_is_identity():
    c = random_collection(60, 10)
    out = perturb(c, PerturbConfig(rate=0.0, kind="positional", seed=1))
    assert out.layouts == c.layouts


def test_perturb_rate_one_label_flips_every_element():
    c = random_collection(61, 10, n_categories=2)
    out = perturb(c, PerturbConfig(rate=1.0, kind="label", seed=2))
    for before, after in zip(c.layouts, out.layouts):
        for eb, ea in zip(before.elements, after.elements):
            assert ea.category != eb.category
            assert ea.bbox == eb.bbox


def test_perturb_positional_bounds_and_sizes():
    c = random_collection(62, 120, min_elements=8, max_elements=10)
    cfg = PerturbConfig(rate=1.0, kind="positional", max_offset=0.1, seed=3)
    out = perturb(c, cfg)
    checked = 0
    for before, after in zip(c.layouts, out.layouts):
        for eb, ea in zip(before.elements, after.elements):
            assert ea.bbox.width == eb.bbox.width
            assert ea.bbox.height == eb.bbox.height
            assert abs(ea.bbox.left - eb.bbox.left) <= 0.1 + 1e-12
            assert abs(ea.bbox.top - eb.bbox.top) <= 0.1 + 1e-12
            assert 0.0 <= ea.bbox.left and ea.bbox.right <= 1.0 + 1e-12
            assert 0.0 <= ea.bbox.top and ea.bbox.bottom <= 1.0 + 1e-12
            checked += 1
    assert checked >= 1000


def test_perturb_label_needs_two_categories():
    c = random_collection(63, 3, n_categories=1)
    with pytest.raises(VocabularyTooSmallError):
        perturb(c, PerturbConfig(rate=0.5, kind="label", seed=4))


def test_perturb_deterministic_serialization(tmp_path):
    c = random_collection(64, 8)
    cfg = PerturbConfig(rate=0.4, kind="positional", seed=5)
    first, second = perturb(c, cfg), perturb(c, cfg)
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    save_collection(first, paths[0])
    save_collection(second, paths[1])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert perturb(c, PerturbConfig(rate=0.4, kind="positional", seed=6)) != first


def test_perturb_subsampling_keeps_element_streams():
    c = random_collection(65, 10)
    cfg = PerturbConfig(rate=0.5, kind="positional", seed=7)
    full = perturb(c, cfg)
    half = LayoutCollection(c.layouts[::2], c.vocabulary)
    half_perturbed = perturb(half, cfg)
    assert half_perturbed.layouts == full.layouts[::2]


def test_perturb_mean_distance_grows_with_rate():
    c = random_collection(66, 40)
    medians = []
    for rate in (0.1, 0.2, 0.3, 0.4, 0.5):
        trial_means = []
        for trial in range(10):
            out = perturb(c, PerturbConfig(rate=rate, kind="positional", seed=100 + trial))
            emds = [ltsim_emd(a, b).value for a, b in zip(c.layouts, out.layouts)]
            trial_means.append(float(np.mean(emds)))
        medians.append(float(np.median(trial_means)))
    for lo, hi in zip(medians, medians[1:]):
        assert lo < hi


# ---------------------------------------------------------------- retrieve

def test_retrieve_self_hit():
    c = random_collection(67, 12)
    query = c.layouts[4]
    ranked = retrieve(query, c, "ltsim", k=3)
    assert ranked.items[0][0] == query.id
    assert ranked.items[0][1] == 1.0


def test_retrieve_skips_incomparable_layouts():
    c = random_collection(68, 9, min_elements=2, max_elements=3)
    rng = np.random.default_rng(69)
    query = random_layout(rng, "query", 7)  # element count unseen in c
    ranked = retrieve(query, c, "maxiou-beta", k=2)
    assert ranked.items == ()
    assert ranked.meta["skipped"] == len(c)


def test_retrieve_orders_by_ascending_emd():
    anchor = (0.1, 0.1, 0.3, 0.3, 0)
    query = layout("q", anchor)
    near = layout("near", (0.12, 0.1, 0.3, 0.3, 0))
    mid = layout("mid", (0.3, 0.1, 0.3, 0.3, 0))
    far = layout("far", (0.6, 0.5, 0.3, 0.3, 0))
    c = LayoutCollection((far, near, mid), ("c0",))
    ranked = retrieve(query, c, "ltsim-emd", k=3)
    assert [i for i, _ in ranked.items] == ["near", "mid", "far"]
    emds = {l.id: ltsim_emd(query, l).value for l in c.layouts}
    assert [-s for _, s in ranked.items] == sorted(emds.values())


def test_retrieve_validates_inputs():
    c = random_collection(70, 4)
    with pytest.raises(UnknownMeasureError):
        retrieve(c.layouts[0], c, "fid", k=1)
    with pytest.raises(ValueError):
        retrieve(c.layouts[0], c, "ltsim", k=9)


def test_retrieve_configuration_errors_propagate():
    from layout_metrics.errors import InvalidSigmaError

    c = random_collection(75, 4)
    with pytest.raises(InvalidSigmaError):
        retrieve(c.layouts[0], c, "ltsim", k=2, sigma=-1.0)


# ---------------------------------------------------------------- kendall tau

def test_kendall_tau_fixtures():
    assert kendall_tau([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]) == 1.0
    assert kendall_tau([1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0]) == -1.0
    assert kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx((5 - 1) / 6, abs=1e-12)


def test_kendall_tau_errors():
    with pytest.raises(LengthMismatchError):
        kendall_tau([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(AllTiedError):
        kendall_tau([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        kendall_tau([1.0], [2.0])


def test_kendall_tau_matches_brute_force_with_ties():
    rng = np.random.default_rng(71)
    for _ in range(50):
        n = int(rng.integers(3, 30))
        a = rng.integers(0, 6, size=n).astype(float)
        b = rng.integers(0, 6, size=n).astype(float)
        if np.all(a == a[0]) or np.all(b == b[0]):
            continue
        assert kendall_tau(a, b) == pytest.approx(brute_force_tau_b(a, b), abs=1e-12)


def test_kendall_tau_invariant_under_monotone_transform():
    rng = np.random.default_rng(72)
    a = rng.uniform(0, 1, size=40)
    b = rng.uniform(0, 1, size=40)
    base = kendall_tau(a, b)
    assert kendall_tau(np.exp(3 * a), b) == pytest.approx(base, abs=1e-12)
    assert kendall_tau(a, 5 * b - 2) == pytest.approx(base, abs=1e-12)


# ------------------------------------------------------- measure correlation

def test_correlation_monotone_measures_agree():
    rng = np.random.default_rng(73)
    pairs = [
        (random_layout(rng, f"a{i}", int(rng.integers(2, 6))),
         random_layout(rng, f"b{i}", int(rng.integers(2, 6))))
        for i in range(12)
    ]
    taus = measure_correlation(pairs, ["ltsim", "ltsim-emd"])
    assert taus[0, 1] == 1.0
    assert taus[0, 0] == taus[1, 1] == 1.0


def test_correlation_multiset_precheck():
    rng = np.random.default_rng(74)
    good = random_layout(rng, "g", 3)
    pairs = [(good, good), (good, random_layout(rng, "h", 4))]
    with pytest.raises(MultisetPrecheckFailedError) as exc_info:
        measure_correlation(pairs, ["ltsim", "maxiou-beta"])
    assert exc_info.value.indices == (1,)


def test_correlation_matches_brute_force_counting():
    # pairs engineered so docsim (area-driven) and ltsim (geometry-driven)
    # produce different rankings
    pairs = []
    for i, (size, shift) in enumerate([(0.9, 0.02), (0.7, 0.1), (0.5, 0.2), (0.3, 0.3), (0.12, 0.4)]):
        a = layout(f"a{i}", (0.0, 0.0, size, size, 0))
        b = layout(f"b{i}", (shift, shift, size, min(size, 1.0 - shift), 0))
        pairs.append((a, b))
    taus = measure_correlation(pairs, ["docsim", "ltsim", "meaniou"])
    from layout_metrics import docsim, ltsim, meaniou
    v_doc = [docsim(a, b).value for a, b in pairs]
    v_lt = [ltsim(a, b).value for a, b in pairs]
    v_miou = [meaniou(a, b).value for a, b in pairs]
    assert taus[0, 1] == pytest.approx(brute_force_tau_b(v_doc, v_lt), abs=1e-12)
    assert taus[0, 2] == pytest.approx(brute_force_tau_b(v_doc, v_miou), abs=1e-12)
    assert taus[1, 2] == pytest.approx(brute_force_tau_b(v_lt, v_miou), abs=1e-12)
    assert (taus == taus.T).all()
