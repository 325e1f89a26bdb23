"""Model and schema builders shared by the tests."""
import numpy as np

from offset_rec.layout import build_layout
from offset_rec.log import US_STATES
from offset_rec.model import Feature, FeatureSchema, Model

# acceptance results, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def make_schema(sizes) -> FeatureSchema:
    return FeatureSchema(tuple(Feature(f"f{k}", tuple(f"v{i}" for i in range(n))) for k, n in enumerate(sizes)))


def random_model(rng, sizes=(3, 4, 2), n_variants=5, s=2, o=3, seed=0, lo=-1.0, hi=1.0) -> Model:
    schema = make_schema(sizes)
    lay = build_layout(len(sizes), s, o, seed)
    values = rng.uniform(lo, hi, size=(sum(sizes), lay.d))
    variants = rng.uniform(lo, hi, size=(n_variants, lay.D))
    return Model(schema, lay, values, variants)


def profile_classes(log) -> np.ndarray:
    """Four profile classes with one true CTR per variant inside each class:
    the two audiences favouring variant 0, the two favouring variant 1,
    California, and everyone else."""
    by, geo = log.birth_year, log.geo
    d80 = (by >= 1980) & (by <= 1989)
    d50 = (by >= 1950) & (by <= 1959)
    ny, az, ca = US_STATES.index("NY"), US_STATES.index("AZ"), US_STATES.index("CA")
    cls = np.full(len(log), 3)
    cls[geo == ca] = 2
    cls[(d50 & (geo == ny)) | (d80 & (geo == az))] = 1
    cls[(d80 & (geo == ny)) | (d50 & (geo == az))] = 0
    return cls


def chi_square_cells(log, rules):
    """Pearson statistic over the 4 x L (class, variant) cells and its cell count."""
    cls = profile_classes(log)
    ctr = rules.ctr_table(log.demographics)[log.birth_year - log.demographics.birth_year_min,
                                            log.geo, log.gender, log.variant]
    stat, cells = 0.0, 0
    for c in range(4):
        for a in range(rules.n_variants):
            m = (cls == c) & (log.variant == a)
            p = np.unique(ctr[m])
            assert len(p) == 1, "cell is not homogeneous"
            n, k = int(m.sum()), int(log.reward[m].sum())
            e = n * p[0]
            stat += (k - e) ** 2 / e + (k - e) ** 2 / (n - e)
            cells += 1
    return stat, cells
