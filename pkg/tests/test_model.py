import math

import pytest

from dmpa.errors import ConfigError, ConstraintError, NotAnalytic, ParamValidationError, RangeError
from dmpa.model import (
    AnalyticParams,
    Color,
    HomophilyMatrix,
    ModelParams,
    ThetaPair,
    acceptance_probability,
    acceptance_table,
    analysis_view,
    color_swap,
    params_from_mapping,
    parse_config_text,
    replace_param,
    validate_params,
)


def test_interior_params_validate_unchanged():
    P = ModelParams.shared(0.5, 0.3, 0.3, 0.5, 0.5, 2.0)
    assert validate_params(P) is P


def test_event_probabilities_exceeding_one_rejected():
    with pytest.raises(ParamValidationError) as exc:
        validate_params(ModelParams.shared(0.5, 0.7, 0.5, 0.5, 0.5, 2.0))
    assert any(isinstance(v, ConstraintError) for v in exc.value.violations)


def test_zero_delta_is_range_error():
    P = ModelParams(0.5, 0.3, 0.3, *[HomophilyMatrix(0.5, 0.5)] * 3, 0.0, 1.0)
    with pytest.raises(ParamValidationError) as exc:
        validate_params(P)
    (v,) = exc.value.violations
    assert isinstance(v, RangeError) and v.field == "delta_in"


def test_every_violation_reported():
    P = ModelParams(1.5, 0.7, 0.5, HomophilyMatrix(-0.1, 0.5), HomophilyMatrix(0.5, 2.0),
                    HomophilyMatrix(0.5, 0.5), 0.0, -1.0)
    with pytest.raises(ParamValidationError) as exc:
        validate_params(P)
    fields = {getattr(v, "field", None) for v in exc.value.violations}
    assert {"r", "rho_blue_e1", "rho_red_e2", "delta_in", "delta_out"} <= fields
    assert any(isinstance(v, ConstraintError) for v in exc.value.violations)


def test_nan_parameter_rejected():
    with pytest.raises(ParamValidationError):
        validate_params(ModelParams.shared(math.nan, 0.3, 0.3, 0.5, 0.5, 2.0))


def test_analysis_view_shared_regime():
    E = HomophilyMatrix(0.9, 0.9)
    ap = analysis_view(ModelParams(0.3, 0.2, 0.3, E, E, E, 4.0, 4.0))
    assert (ap.rho_blue, ap.rho_red, ap.delta) == (0.9, 0.9, 4.0)


def test_analysis_view_refuses_differing_matrices():
    P = ModelParams(0.3, 0.2, 0.3, HomophilyMatrix(0.9, 0.9), HomophilyMatrix(0.9, 0.8),
                    HomophilyMatrix(0.9, 0.9), 4.0, 4.0)
    with pytest.raises(NotAnalytic, match="simulate"):
        analysis_view(P)


def test_analysis_view_refuses_differing_deltas():
    E = HomophilyMatrix(0.5, 0.5)
    with pytest.raises(NotAnalytic):
        analysis_view(ModelParams(0.3, 0.2, 0.3, E, E, E, 1.0, 2.0))


def test_analysis_view_equality_is_exact():
    E1 = HomophilyMatrix(0.9, 0.9)
    E2 = HomophilyMatrix(0.9 + 1e-15, 0.9)
    with pytest.raises(NotAnalytic):
        analysis_view(ModelParams(0.3, 0.2, 0.3, E1, E2, E1, 4.0, 4.0))


def test_cross_colour_acceptance_uses_follower_rho():
    P = ModelParams(0.5, 0.3, 0.3, HomophilyMatrix(0.8, 0.3), HomophilyMatrix(0.6, 0.7),
                    HomophilyMatrix(0.1, 0.2), 1.0, 1.0)
    assert acceptance_probability(1, Color.BLUE, Color.RED, P) == pytest.approx(1 - 0.8)
    assert acceptance_probability(2, Color.RED, Color.RED, P) == 0.7
    assert acceptance_probability(3, Color.RED, Color.BLUE, P) == pytest.approx(1 - 0.2)
    assert acceptance_probability(3, Color.BLUE, Color.BLUE, P) == 0.1


def test_unbiased_matrix_accepts_half_everywhere():
    P = ModelParams.shared(0.5, 0.3, 0.3, 0.5, 0.5, 1.0)
    assert set(acceptance_table(P)) == {0.5}


def test_acceptance_table_layout():
    P = ModelParams(0.5, 0.3, 0.3, HomophilyMatrix(0.8, 0.3), HomophilyMatrix(0.6, 0.7),
                    HomophilyMatrix(0.1, 0.2), 1.0, 1.0)
    acc = acceptance_table(P)
    for ev in (1, 2, 3):
        for f in Color:
            for g in Color:
                assert acc[(ev - 1) * 4 + int(f) * 2 + int(g)] == acceptance_probability(ev, f, g, P)


def test_matrix_form_derived_from_pair():
    assert HomophilyMatrix(0.9, 0.2).as_matrix() == [[0.9, 0.8], [pytest.approx(0.1), 0.2]]


def test_color_swap_substitution():
    ap = AnalyticParams(0.3, 0.2, 0.3, 0.9, 0.2, 2.0)
    sw, th = color_swap(ap, ThetaPair(0.25, 0.40))
    assert (sw.r, sw.rho_blue, sw.rho_red) == (0.7, 0.2, 0.9)
    assert (th.theta_in, th.theta_out) == (0.75, 0.6)


def test_color_swap_symmetric_point_unchanged():
    ap = AnalyticParams(0.5, 0.2, 0.3, 0.4, 0.4, 2.0)
    sw, th = color_swap(ap, ThetaPair(0.5, 0.5))
    assert sw == ap and th == ThetaPair(0.5, 0.5)


def test_color_swap_involution_is_bitwise():
    ap = AnalyticParams(0.1 + 0.2, 0.2, 0.3, 0.9, 0.2, 2.0)
    th = ThetaPair(0.1 + 0.2, 0.7)
    sw, sth = color_swap(*color_swap(ap, th))
    assert sw == ap and sth == th


def test_config_parsing_with_per_event_defaults():
    m = parse_config_text("""
        # shared pair with one event override
        r = 0.3
        p: 0.2
        q = 0.3
        delta = 2
        rho_blue = 0.6
        rho_red = 0.7
        rho_red_e3 = 0.1
    """)
    P = params_from_mapping(m)
    assert P.E1 == P.E2 == HomophilyMatrix(0.6, 0.7)
    assert P.E3 == HomophilyMatrix(0.6, 0.1)
    assert P.delta_in == P.delta_out == 2.0


def test_config_missing_key_is_config_error():
    with pytest.raises(ConfigError, match="rho_red"):
        params_from_mapping({"r": "0.3", "p": "0.2", "q": "0.3", "delta": "1", "rho_blue": "0.5"})


def test_config_garbage_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("r = 0.3\nnot a pair\n")


def test_replace_param_shared_rho():
    P = ModelParams.shared(0.3, 0.2, 0.3, 0.5, 0.5, 2.0)
    Q = replace_param(P, "rho_red", 0.9)
    assert Q.E1 == Q.E2 == Q.E3 == HomophilyMatrix(0.5, 0.9)
