import pytest

from scorerec.prompts import (
    EmptyFieldError,
    PromptBundle,
    assessment_prompt,
    basic_prompt,
    ci_prompt,
)

H = "'Heat (1995)', 'Fargo (1996)'"
T = "'Edward Scissorhands (1990)'"


def test_basic_prompt_verbatim():
    assert basic_prompt(H, T) == (
        "The user has highly rated the following movies: 'Heat (1995)', 'Fargo (1996)'. "
        "Based on this information, predict whether the user would enjoy the movie titled "
        "'Edward Scissorhands (1990)'. Respond with either 'Yes' or 'No'."
    )


def test_assessment_prompt_shape():
    p = assessment_prompt(H, T)
    assert p.startswith("The user has watched the following movies:")
    assert "What other genres or characteristics" in p
    assert p.count("Edward Scissorhands") == 1
    assert "<" not in p


def test_ci_prompt_brackets_each_behavior_in_order():
    p = ci_prompt(H, ["'A (1)'", "'B (2)', 'C (3)'"], T)
    assert "given high ratings to the movies: ['A (1)'], ['B (2)', 'C (3)']. Based on" in p
    assert "<" not in p


def test_ci_prompt_without_behaviors_is_basic():
    assert ci_prompt(H, [], T) == basic_prompt(H, T)


def test_fill_is_single_pass():
    tricky = "'A <TargetItem> film (2000)'"
    p = basic_prompt(tricky, T)
    assert tricky in p
    assert p.count(T) == 1


def test_empty_fields_named():
    with pytest.raises(EmptyFieldError) as e:
        basic_prompt("", T)
    assert e.value.field == "history"
    with pytest.raises(EmptyFieldError) as e:
        ci_prompt(H, ["x", ""], T)
    assert e.value.field == "SimilarBehaviorList_2"


def test_bundle_rejects_missing_placeholder():
    with pytest.raises(ValueError):
        PromptBundle(template_basic="no slots here <HistoryList>")
