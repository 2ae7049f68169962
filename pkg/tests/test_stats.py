import math

import numpy as np
import pytest

from perinodular.stats import (
    ContingencyTable,
    DegenerateTableError,
    chi_square_2x2,
    dichotomize,
    group_summary,
    odds_ratio,
    pearson_r,
    t_test_two_sample,
)

# Published 2x2 cell counts paired with the printed OR / chi-square values.
# Cells are (<=cutoff benign, <=cutoff malignant, >cutoff benign, >cutoff
# malignant) and so on for the other dichotomized attributes.
PUBLISHED_TABLES = [
    # distance rows
    ("pleura/malignancy", (407, 253, 637, 259), 0.65, 15.30),
    ("pleura/eqd", (400, 260, 708, 188), 0.41, 62.84),
    ("pleura/texture", (475, 185, 615, 281), 1.17, 2.01),
    ("airway/malignancy", (12, 50, 1032, 462), 0.11, 66.66),
    ("airway/eqd", (14, 48, 1094, 400), 0.11, 74.48),
    ("airway/texture", (47, 15, 1043, 451), 1.35, 1.02),
    ("vessel/malignancy", (896, 498, 148, 14), 0.17, 48.22),
    ("vessel/eqd", (950, 444, 158, 4), 0.05, 61.11),
    ("vessel/texture", (966, 428, 124, 38), 0.69, 3.63),
    ("artery/malignancy", (540, 433, 504, 79), 0.20, 158.19),
    ("artery/eqd", (572, 401, 536, 47), 0.13, 195.42),
    ("artery/texture", (633, 340, 457, 126), 0.51, 30.88),
    ("vein/malignancy", (681, 432, 363, 80), 0.35, 61.83),
    ("vein/eqd", (711, 402, 397, 46), 0.20, 102.36),
    ("vein/texture", (780, 333, 310, 133), 1.00, 0.00),
    # counting-number rows
    ("airway-count-c1/malignancy", (1038, 436, 6, 76), 30.16, 140.11),
    ("airway-count-c1/eqd", (1104, 370, 4, 78), 58.18, 185.76),
    ("airway-count-c1/texture", (1035, 439, 55, 27), 1.16, 0.37),
    ("airway-count-c2/malignancy", (1038, 452, 6, 60), 22.96, 105.04),
    ("airway-count-c2/eqd", (1105, 385, 3, 63), 60.27, 149.39),
    ("airway-count-c2/texture", (1048, 442, 42, 24), 1.35, 1.35),
    ("vessel-count-c1/malignancy", (907, 108, 137, 404), 24.77, 655.47),
    ("vessel-count-c1/eqd", (966, 49, 142, 399), 55.39, 817.72),
    ("vessel-count-c1/texture", (733, 282, 357, 184), 1.34, 6.52),
    ("vessel-count-c2/malignancy", (850, 196, 194, 316), 7.06, 290.11),
    ("vessel-count-c2/eqd", (910, 136, 198, 312), 10.54, 388.09),
    ("vessel-count-c2/texture", (748, 298, 342, 168), 1.23, 3.24),
    ("artery-count-c1/malignancy", (964, 144, 80, 368), 30.79, 690.87),
    ("artery-count-c1/eqd", (1024, 84, 84, 364), 52.83, 844.45),
    ("artery-count-c1/texture", (788, 320, 302, 146), 1.19, 2.09),
    ("artery-count-c2/malignancy", (839, 232, 205, 280), 4.94, 196.73),
    ("artery-count-c2/eqd", (879, 192, 229, 256), 5.12, 197.83),
    ("artery-count-c2/texture", (755, 316, 335, 150), 1.07, 0.32),
    ("vein-count-c1/malignancy", (991, 174, 53, 338), 36.32, 678.06),
    ("vein-count-c1/eqd", (1060, 105, 48, 343), 72.14, 884.64),
    ("vein-count-c1/texture", (827, 338, 263, 128), 1.19, 1.93),
    ("vein-count-c2/malignancy", (916, 280, 128, 232), 5.93, 211.03),
    ("vein-count-c2/eqd", (979, 217, 129, 231), 8.08, 285.87),
    ("vein-count-c2/texture", (849, 347, 241, 119), 1.21, 2.16),
    # normalized-volume rows
    ("airway-nvol-c1/malignancy", (1010, 391, 34, 121), 9.19, 159.02),
    ("airway-nvol-c1/eqd", (1074, 327, 34, 121), 11.69, 203.85),
    ("airway-nvol-c1/texture", (978, 423, 112, 43), 0.89, 0.40),
    ("airway-nvol-c2/malignancy", (1010, 391, 34, 121), 9.19, 159.02),
    ("airway-nvol-c2/eqd", (1074, 327, 34, 121), 11.69, 203.85),
    ("airway-nvol-c2/texture", (978, 423, 112, 43), 0.89, 0.40),
    ("vessel-nvol-c1/malignancy", (365, 44, 679, 468), 5.72, 123.27),
    ("vessel-nvol-c1/eqd", (379, 30, 729, 418), 7.24, 124.60),
    ("vessel-nvol-c1/texture", (296, 113, 794, 353), 1.16, 1.42),
    ("vessel-nvol-c2/malignancy", (563, 173, 481, 339), 2.29, 55.89),
    ("vessel-nvol-c2/eqd", (585, 151, 523, 297), 2.20, 46.65),
    ("vessel-nvol-c2/texture", (514, 222, 576, 244), 0.98, 0.03),
    ("artery-nvol-c1/malignancy", (704, 181, 340, 331), 3.79, 144.15),
    # artery-nvol-c1/eqd is omitted: the published OR/chi2 (7.24/124.60)
    # duplicate the vessel row verbatim and do not follow from the published
    # cells (340/164/387/284 give 3.23/105.39) -- an apparent misprint.
    ("artery-nvol-c1/texture", (639, 246, 451, 220), 1.27, 4.53),
    ("artery-nvol-c2/malignancy", (796, 357, 248, 155), 1.39, 7.61),
    ("artery-nvol-c2/eqd", (821, 332, 287, 116), 1.00, 0.00),
    ("artery-nvol-c2/texture", (814, 339, 276, 127), 1.10, 0.63),
    ("vein-nvol-c1/malignancy", (689, 254, 355, 258), 1.97, 38.64),
    ("vein-nvol-c1/eqd", (715, 228, 393, 220), 1.76, 24.85),
    ("vein-nvol-c1/texture", (654, 289, 436, 177), 0.92, 0.56),
    ("vein-nvol-c2/malignancy", (810, 408, 234, 104), 0.88, 0.89),
    ("vein-nvol-c2/eqd", (846, 372, 262, 76), 0.66, 8.38),
    ("vein-nvol-c2/texture", (854, 364, 236, 102), 1.01, 0.01),
]


def test_dichotomize_boundary():
    assert dichotomize([0.0, 1.0, 1.5], 1.0) == (2, 1)


def test_dichotomize_all_above():
    assert dichotomize([2.0, 3.0, 9.0], 1.0) == (0, 3)


def test_dichotomize_published_pleura_row():
    # 660 nodules at distance <= 1 mm, 896 above, matching the published split
    values = [0.5] * 660 + [2.0] * 896
    assert dichotomize(values, 1.0) == (660, 896)


def test_dichotomize_empty():
    with pytest.raises(ValueError):
        dichotomize([], 1.0)


@pytest.mark.parametrize("name,cells,expected_or,expected_chi",
                         PUBLISHED_TABLES, ids=[r[0] for r in PUBLISHED_TABLES])
def test_published_tables_reproduce(name, cells, expected_or, expected_chi):
    table = ContingencyTable(*cells)
    tol = 0.05 if expected_or > 20 else 0.01
    assert odds_ratio(table) == pytest.approx(expected_or, abs=tol)
    assert chi_square_2x2(table).statistic == pytest.approx(expected_chi, abs=0.5)


def test_headline_fixtures_exact_tolerances():
    table = ContingencyTable(407, 253, 637, 259)
    assert odds_ratio(table) == pytest.approx(0.65, abs=0.01)
    assert chi_square_2x2(table).statistic == pytest.approx(15.30, abs=0.1)
    table = ContingencyTable(1038, 452, 6, 60)
    assert odds_ratio(table) == pytest.approx(22.96, abs=0.05)
    assert chi_square_2x2(table).statistic == pytest.approx(105.04, abs=0.5)
    table = ContingencyTable(1010, 391, 34, 121)
    assert odds_ratio(table) == pytest.approx(9.19, abs=0.01)
    assert chi_square_2x2(table).statistic == pytest.approx(159.02, abs=0.5)
    table = ContingencyTable(563, 173, 481, 339)
    assert odds_ratio(table) == pytest.approx(2.29, abs=0.01)
    assert chi_square_2x2(table).statistic == pytest.approx(55.89, abs=0.5)


def test_no_continuity_correction():
    # the published 15.30 matches the uncorrected statistic; Yates gives 14.87
    stat = chi_square_2x2(ContingencyTable(407, 253, 637, 259)).statistic
    assert stat == pytest.approx(15.298, abs=1e-3)
    assert abs(stat - 14.87) > 0.3


def test_odds_ratio_reciprocal_under_column_swap():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b, c, d = rng.integers(1, 500, size=4)
        t = ContingencyTable(a, b, c, d)
        swapped = ContingencyTable(b, a, d, c)
        assert odds_ratio(t) * odds_ratio(swapped) == pytest.approx(1.0, rel=1e-12)


def test_odds_ratio_degenerate_policy():
    assert odds_ratio(ContingencyTable(5, 0, 3, 2)) == math.inf
    with pytest.raises(DegenerateTableError):
        odds_ratio(ContingencyTable(0, 0, 3, 2))  # zero row
    # explicit Haldane correction instead of infinity
    assert odds_ratio(ContingencyTable(5, 0, 3, 2), haldane=True) == pytest.approx(
        (5.5 * 2.5) / (0.5 * 3.5))


def test_chi_square_transpose_and_swap_invariance():
    rng = np.random.default_rng(1)
    for _ in range(25):
        a, b, c, d = rng.integers(1, 300, size=4)
        stat = chi_square_2x2(ContingencyTable(a, b, c, d)).statistic
        assert chi_square_2x2(ContingencyTable(a, c, b, d)).statistic == pytest.approx(stat)
        assert chi_square_2x2(ContingencyTable(d, c, b, a)).statistic == pytest.approx(stat)


def test_chi_square_scaling():
    t = ContingencyTable(12, 34, 56, 78)
    base = chi_square_2x2(t).statistic
    for k in (2, 3, 7):
        scaled = ContingencyTable(12 * k, 34 * k, 56 * k, 78 * k)
        assert chi_square_2x2(scaled).statistic == pytest.approx(k * base, rel=1e-12)
        assert odds_ratio(scaled) == pytest.approx(odds_ratio(t), rel=1e-12)


def test_chi_square_independence():
    res = chi_square_2x2(ContingencyTable(10, 20, 30, 60))
    assert res.statistic == 0.0
    assert res.p_value == 1.0


def test_chi_square_degenerate():
    with pytest.raises(DegenerateTableError):
        chi_square_2x2(ContingencyTable(0, 0, 3, 2))


def test_t_identical_samples():
    res = t_test_two_sample([1, 2, 3], [1, 2, 3])
    assert res.statistic == 0.0
    assert res.p_value == pytest.approx(1.0)


def test_t_pooled_hand_value():
    res = t_test_two_sample([1, 2, 3], [2, 3, 4], variant="pooled")
    assert res.statistic == pytest.approx(-1.2247, abs=1e-4)
    assert res.df == 4


def test_t_zero_variance_policies():
    res = t_test_two_sample([2, 2], [2, 2])
    assert res.statistic == 0.0 and res.p_value == 1.0
    res = t_test_two_sample([2, 2], [3, 3])
    assert math.isinf(res.statistic) and res.p_value == 0.0


def test_t_welch_differs_under_unequal_variance():
    a = [1.0, 1.1, 0.9, 1.05, 0.95]
    b = [2.0, 8.0, -3.0, 5.0, -1.0]
    pooled = t_test_two_sample(a, b, variant="pooled")
    welch = t_test_two_sample(a, b, variant="welch")
    assert welch.df < pooled.df


def test_t_requires_two_per_sample():
    with pytest.raises(ValueError):
        t_test_two_sample([1.0], [1.0, 2.0])


def test_pearson_exact_lines():
    assert pearson_r([1, 2, 3, 4], [3, 5, 7, 9]).statistic == pytest.approx(1.0)
    assert pearson_r([1, 2, 3, 4], [-1, -2, -3, -4]).statistic == pytest.approx(-1.0)


def test_pearson_hand_value():
    res = pearson_r([1, 2, 3, 4], [1, 2, 2, 4])
    assert res.statistic == pytest.approx(0.9234, abs=1e-4)
    assert res.df == 2


def test_pearson_affine_invariance():
    rng = np.random.default_rng(2)
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    base = pearson_r(x, y).statistic
    assert pearson_r(3.0 * x + 7.0, y).statistic == pytest.approx(base, abs=1e-12)
    assert pearson_r(-2.0 * x + 1.0, y).statistic == pytest.approx(-base, abs=1e-12)


def test_pearson_constant_rejected():
    with pytest.raises(ValueError):
        pearson_r([1, 1, 1], [1, 2, 3])


def test_group_summary():
    mean, sd = group_summary([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert sd == pytest.approx(1.0)
