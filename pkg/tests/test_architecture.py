import json

import pytest

from imcpack.architecture import (
    ArchitectureError,
    bundled_architecture_names,
    compute_area,
    load_architecture,
)


def test_bundled_names():
    assert set(bundled_architecture_names()) == {"aimc28", "dimc22"}


def test_dimc22_parameters(dimc22):
    arch, cost = dimc22
    assert (arch.Do, arch.Di, arch.Dh, arch.Dm) == (256, 16, 1, 1)
    assert arch.weight_bits == 4 and arch.input_bits == 4
    assert arch.clock_hz == 200e6
    assert arch.imc_kind == "digital"
    assert cost.vdd_V == 0.9
    assert cost.nd2_cap_F == 0.3e-15
    assert cost.cell_area_um2 == 0.379
    assert cost.periph_area_um2 == 44290.0
    assert cost.reported_macro_area_mm2 == 0.202
    # gate-equivalent MAC energy: 50 * 0.3 fF * 0.81 V^2 over 16 bit-products
    assert cost.e_mac_J == pytest.approx(50 * 0.3e-15 * 0.81 / 16, rel=1e-12)


def test_aimc28_parameters(aimc28):
    arch, cost = aimc28
    assert arch.imc_kind == "analog"
    assert cost.cell_area_um2 == 1.2
    assert cost.periph_area_um2 == 15400.0
    assert cost.e_adc_J == 190e-15
    assert cost.reported_macro_area_mm2 == 0.035


def test_memory_block_parameters(dimc22):
    _, cost = dimc22
    assert cost.e_dram_J_per_bit == 4e-12
    assert cost.dram_bw_bits_per_s == 12.8e9
    assert cost.e_buf_J_per_bit == 9e-15
    assert cost.buf_bytes == 256 * 1024


def test_area_example_dimc22(dimc22):
    arch, cost = dimc22
    report = compute_area(arch, cost)
    expected_um2 = 44290.0 + 0.379 * 16 * 256 * 1 * 4
    assert report.macro_area_mm2 == pytest.approx(expected_um2 * 1e-6, rel=1e-12)
    assert report.macro_area_mm2 == pytest.approx(0.0505, abs=2e-4)
    assert report.total_imc_area_mm2 == report.macro_area_mm2


def test_area_affine_in_dm(dimc22):
    from dataclasses import replace

    arch, cost = dimc22
    a1 = compute_area(replace(arch, Dm=3), cost)
    a2 = compute_area(replace(arch, Dm=6), cost)
    cell_term = cost.cell_area_um2 * arch.Di * arch.Do * 3 * arch.weight_bits * 1e-6
    assert a2.macro_area_mm2 - a1.macro_area_mm2 == pytest.approx(cell_term, rel=1e-12)


def test_area_linear_in_dh(dimc22):
    from dataclasses import replace

    arch, cost = dimc22
    base = compute_area(arch, cost)
    quad = compute_area(replace(arch, Dh=4), cost)
    assert quad.total_imc_area_mm2 == pytest.approx(4 * base.macro_area_mm2, rel=1e-12)
    assert quad.macro_area_mm2 == base.macro_area_mm2


def test_density_strictly_increasing_in_dm(dimc22):
    from dataclasses import replace

    arch, cost = dimc22
    densities = [compute_area(replace(arch, Dm=dm), cost).density_bits_per_mm2 for dm in range(1, 65)]
    assert all(b > a for a, b in zip(densities, densities[1:]))


def test_base_override_loading():
    arch, cost = load_architecture({"base": "dimc22", "Dh": 4, "Dm": 16})
    assert (arch.Dh, arch.Dm) == (4, 16)
    assert (arch.Di, arch.Do) == (16, 256)
    assert cost.periph_area_um2 == 44290.0


def test_cost_override_merges():
    arch, cost = load_architecture({"base": "aimc28", "costs": {"e_adc_J": 100e-15}})
    assert cost.e_adc_J == 100e-15
    assert cost.cell_area_um2 == 1.2  # untouched default


def test_unknown_imc_kind():
    doc = {"Di": 8, "Do": 8, "Dh": 1, "Dm": 1, "weight_bits": 4, "input_bits": 4,
           "clock_hz": 1e8, "imc_kind": "quantum"}
    with pytest.raises(ArchitectureError, match="imc_kind"):
        load_architecture(doc)


def test_non_positive_dimension():
    doc = {"Di": 0, "Do": 8, "Dh": 1, "Dm": 1, "weight_bits": 4, "input_bits": 4,
           "clock_hz": 1e8, "imc_kind": "digital"}
    with pytest.raises(ArchitectureError, match="'Di'"):
        load_architecture(doc)


def test_missing_field_reported():
    with pytest.raises(ArchitectureError, match="'Do'"):
        load_architecture({"Di": 8, "Dh": 1, "Dm": 1, "weight_bits": 4, "input_bits": 4,
                           "clock_hz": 1e8, "imc_kind": "digital"})


def test_json_text_and_unknown_cost_field(tmp_path):
    doc = {"base": "dimc22", "costs": {"warp_drive_J": 1.0}}
    with pytest.raises(ArchitectureError, match="warp_drive_J"):
        load_architecture(json.dumps(doc))
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"base": "dimc22", "Dm": 8}))
    arch, _ = load_architecture(str(path))
    assert arch.Dm == 8
