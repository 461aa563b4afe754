"""Prompt assets: packaged loading, per-file overrides, literal-brace slots."""

import pytest

from toolagent.prompts import MissingAsset, PromptLibrary

CORE_ASSETS = [
    "navigator",
    "navigator_tool_search",
    "navigator_tool_code",
    "navigator_tool_perceive",
    "executor",
    "executor_direct",
    "executor_block_search",
    "executor_block_perceive",
    "executor_block_code",
    "executor_hint_search",
    "executor_hint_perceive",
    "executor_hint_code",
    "executor_example_search",
    "executor_example_perceive",
    "executor_example_code",
    "synthesizer",
    "refiner",
    "perceive",
    "code_revision",
]


@pytest.mark.parametrize("name", CORE_ASSETS)
def test_all_core_assets_ship_with_the_package(name):
    assert PromptLibrary().load(name).strip()


def test_missing_asset_raises():
    with pytest.raises(MissingAsset, match="definitely_not_there"):
        PromptLibrary().load("definitely_not_there")


def test_render_replaces_slots():
    lib = PromptLibrary()
    text = lib.render("synthesizer", question="Q?", reasoning="R.")
    assert "Q?" in text
    assert "R." in text
    assert "{question}" not in text
    assert "{reasoning}" not in text


def test_render_keeps_literal_json_braces():
    # The planner prompt embeds a JSON example; replacement must not touch it.
    text = PromptLibrary().render("navigator", tool_pool="1. X", question="Q?")
    assert '"selected_tools"' in text
    assert "{" in text and "}" in text


def test_override_directory_wins(tmp_path):
    (tmp_path / "synthesizer.txt").write_text("custom: {question}", encoding="utf-8")
    lib = PromptLibrary(tmp_path)
    assert lib.render("synthesizer", question="Q?") == "custom: Q?"
    # Non-overridden assets still come from the package.
    assert "planner" in lib.load("navigator")


def test_unknown_slots_are_left_verbatim():
    lib = PromptLibrary()
    text = lib.render("perceive", question="what?")
    assert "what?" in text
    assert "{question}" not in text
