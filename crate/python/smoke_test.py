"""Smoke test for the billiards Python extension."""

import json
import math

import billiards


def main():
    names = billiards.presets()
    assert "birkhoff-ellipse" in names, names

    sphere = billiards.Space("sphere", 0.5)
    q = sphere.lift((0.3, -0.2))
    p = sphere.project(q)
    assert math.isclose(p[0], 0.3) and math.isclose(p[1], -0.2), p

    params = billiards.Params(m1=0.3, f=-0.2)
    e_native, e_partner = billiards.energy_pair(sphere, params, (0.1, 0.2), (0.5, -0.4))
    assert math.isfinite(e_native) and math.isfinite(e_partner)

    z, w = billiards.square_map(0.5 + 0.5j, 1.0 + 0.0j)
    assert abs(z - 0.5j) < 1e-15, z

    out = billiards.run_scenario(billiards.preset_json("kepler-focused-ellipse-sphere"))
    assert out["report"]["all_ok"], out["report"]
    assert len(out["trajectory"][0]) == 8
    print(f"kepler-focused-ellipse-sphere: {len(out['trajectory'])} samples, {len(out['events'])} bounces")

    orbit = billiards.orbit_correspondence("spherical_hooke_kepler", 0.3, 0.4 + 0.05j, 0.1 + 0.8j)
    assert orbit["max_distance"] < 1e-6, orbit["max_distance"]

    image = billiards.confocal_image_check(0.3, 0.6)
    assert image["sphere_residual"] < 1e-8, image

    results = billiards.run_verify("all")
    for c in results:
        print(f"criterion {c['id']}: {'PASS' if all(ch['pass'] != ch['expect_fail'] for ch in c['checks']) else 'FAIL'}")
    assert len(results) == 8

    try:
        billiards.run_scenario(json.dumps({"name": "broken"}))
    except ValueError:
        pass
    else:
        raise AssertionError("malformed scenario accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
