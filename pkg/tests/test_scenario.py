import math

import pytest

from basinopt.scenario import (DECEMBER, ScenarioError, builtin_rajshahi,
                               builtin_rajshahi_csv, dumps_scenario,
                               load_scenario, save_scenario, scenario_digest,
                               validate)


def test_builtin_shape(rajshahi):
    assert len(rajshahi.crops) == 9
    assert set(rajshahi.year_labels()) == {"dry", "avg", "wet"}


def test_builtin_transcription_values(rajshahi):
    # crop economics
    assert rajshahi.crops["Potato"].price == 13000
    assert rajshahi.crops["Potato"].crop_yield == 20.44
    assert rajshahi.crops["Sugarcane"].price == 5580
    assert rajshahi.crops["Sugarcane"].crop_yield == 60
    assert rajshahi.crops["Maize Rabi"].price == 3100  # kept verbatim
    assert rajshahi.crops["Boro rice"].var_cost == 132900
    # crop coefficients (December is index 11)
    assert rajshahi.crops["Boro rice"].kc[DECEMBER] == 1.05
    assert rajshahi.crops["Potato"].kc[DECEMBER] == 0.25
    assert rajshahi.crops["Aus rice"].kc[3] == 1.05  # April
    # minimum areas
    mins = {c.name: c.min_area for c in rajshahi.crops}
    assert mins == {"Aus rice": 20000, "Aman rice": 35000, "Boro rice": 30000,
                    "Wheat": 10000, "Potato": 15000, "Sugarcane": 16000,
                    "Maize Kharif-1": 5000, "Maize Rabi": 5000, "Jute": 6000}
    # system data
    assert rajshahi.economics.cw == 26000
    assert rajshahi.economics.cp == 100000
    assert rajshahi.limits.t_pump == 500
    assert rajshahi.limits.t_area == 182271
    assert rajshahi.limits.canal_cap == 6000


def test_min_area_arithmetic(rajshahi):
    """Eight non-potato minimums sum to 127000 ha, so the spare area that
    can go to the most profitable crop is 182271 - 127000 = 55271 ha."""
    mins = {c.name: c.min_area for c in rajshahi.crops}
    non_potato = sum(v for k, v in mins.items() if k != "Potato")
    assert non_potato == 127000
    assert sum(mins.values()) == 142000
    assert rajshahi.limits.t_area - non_potato == 55271


def test_unit_normalization(rajshahi):
    # printed value 0.6 (1e-4 GL/ha) for dry January rainfall
    assert math.isclose(rajshahi.year("dry").rainfall[0], 0.6e-4)
    assert math.isclose(rajshahi.year("dry").et0[0], 10.7e-4)
    # wet April ET kept verbatim even though it looks like a misprint
    assert math.isclose(rajshahi.year("wet").et0[3], 1.49e-4)


def test_tef_fractions_default_rule(rajshahi):
    for label in rajshahi.year_labels():
        frac = rajshahi.year(label).tef_fraction
        assert frac[:4] == (1.0, 1.0, 1.0, 1.0)      # Jan-Apr
        assert frac[4:10] == (0.4,) * 6               # May-Oct
        assert frac[10:] == (1.0, 1.0)                # Nov-Dec


def test_inflow_flagged_reconstructed(rajshahi):
    assert rajshahi.provenance.get("inflow") == "reconstructed"


def test_validate_builtin_ok(rajshahi):
    report = validate(rajshahi)
    assert report.ok
    # the two loss-making crops are flagged but not fatal
    warn_paths = {f.path for f in report.warnings}
    assert any("Maize Rabi" in p for p in warn_paths)
    assert any("Jute" in p for p in warn_paths)


def test_validate_min_area_overflow(rajshahi):
    import dataclasses
    bad = rajshahi.with_limits(t_area=141999.0)  # sum of mins is 142000
    report = validate(bad)
    assert not report.ok
    assert any("min areas exceed total area" in f.message
               for f in report.errors)


def test_validate_tef_fraction_range(rajshahi):
    bad = rajshahi.with_tef_fraction("dry", (1.3,) + (1.0,) * 11)
    report = validate(bad)
    assert not report.ok
    assert any("out of range" in f.message for f in report.errors)


def test_validate_negative_price(rajshahi):
    import dataclasses
    from basinopt.scenario import CropTable
    crops = list(rajshahi.crops)
    crops[0] = dataclasses.replace(crops[0], price=-1.0)
    bad = dataclasses.replace(rajshahi, crops=CropTable(crops))
    report = validate(bad)
    assert not report.ok
    assert any(f.path.endswith(".price") for f in report.errors)


def test_roundtrip_full_precision(rajshahi, tmp_path):
    path = tmp_path / "copy.toml"
    save_scenario(rajshahi, path)
    back = load_scenario(path)
    assert back.crops == rajshahi.crops
    assert back.years == rajshahi.years
    assert back.economics == rajshahi.economics
    assert back.limits == rajshahi.limits
    assert back.options == rajshahi.options


def test_builtin_equals_bundled_file(rajshahi):
    again = builtin_rajshahi()
    assert again == rajshahi  # single source of truth: the data file


def test_csv_bundle_matches_toml(rajshahi):
    from_csv = builtin_rajshahi_csv()
    assert from_csv.crops == rajshahi.crops
    assert from_csv.economics == rajshahi.economics
    assert from_csv.limits == rajshahi.limits
    for label in rajshahi.year_labels():
        a, b = from_csv.year(label), rajshahi.year(label)
        assert a.inflow == b.inflow
        assert all(math.isclose(x, y)
                   for x, y in zip(a.rainfall, b.rainfall))
        assert all(math.isclose(x, y) for x, y in zip(a.et0, b.et0))
        assert a.tef_fraction == b.tef_fraction


def test_series_length_error(tmp_path, rajshahi):
    text = dumps_scenario(rajshahi)
    # drop one rainfall entry from the dry year
    lines = text.splitlines()
    for i, ln in enumerate(lines):
        if ln.startswith("rainfall") and "[year.dry]" in lines[i - 1]:
            vals = ln.split("[")[1].rstrip("]").split(",")
            lines[i] = "rainfall = [" + ",".join(vals[:11]) + "]"
            break
    bad = tmp_path / "bad.toml"
    bad.write_text("\n".join(lines))
    with pytest.raises(ScenarioError, match="series length"):
        load_scenario(bad)


def test_missing_units_error(tmp_path, rajshahi):
    text = dumps_scenario(rajshahi)
    text = text.replace('rainfall = "GL/ha"\n', "")
    bad = tmp_path / "bad.toml"
    bad.write_text(text)
    with pytest.raises(ScenarioError, match="units"):
        load_scenario(bad)


def test_unknown_unit_error(tmp_path, rajshahi):
    text = dumps_scenario(rajshahi).replace('et0 = "GL/ha"', 'et0 = "mm"')
    bad = tmp_path / "bad.toml"
    bad.write_text(text)
    with pytest.raises(ScenarioError, match="unknown unit"):
        load_scenario(bad)


def test_parse_error_reports_location(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[crops\nname == oops")
    with pytest.raises(ScenarioError, match="parse error"):
        load_scenario(bad)


def test_missing_file_error(tmp_path):
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario(tmp_path / "nope.toml")


def test_digest_stable(rajshahi):
    assert scenario_digest(rajshahi) == scenario_digest(builtin_rajshahi())
    assert len(scenario_digest(rajshahi)) == 16


def test_year_aliases(rajshahi):
    assert rajshahi.year("average") is rajshahi.year("avg")
    with pytest.raises(KeyError):
        rajshahi.year("monsoon")
