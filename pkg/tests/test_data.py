import numpy as np
import pytest

from netkrige.data import (
    Dataset,
    FieldParams,
    Geometry,
    SplitSpec,
    build_adjacency,
    gen_synthetic,
    load_csv,
    load_geometry,
    load_signals,
    sample_waves,
    save_csv,
    split,
    wave_values,
)
from netkrige.errors import IngestionError, ParameterError
from netkrige.graph import DistanceMatrix
from netkrige.sampler import SignalMatrix


class TestGenSynthetic:
    def test_fixed_seed_identical(self):
        a = gen_synthetic(8, 50, seed=7)
        b = gen_synthetic(8, 50, seed=7)
        assert np.array_equal(a.signals.values, b.signals.values)
        assert np.array_equal(a.geometry.coords, b.geometry.coords)

    def test_noiseless_reproducible(self):
        a = gen_synthetic(6, 40, noise_std=0.0, seed=3)
        b = gen_synthetic(6, 40, noise_std=0.0, seed=3)
        assert np.array_equal(a.signals.values, b.signals.values)

    def test_colocated_sensors_identical_signals(self):
        rng = np.random.default_rng(5)
        waves = sample_waves(FieldParams(), rng)
        coords = np.array([[0.3, 0.4], [0.3, 0.4], [0.9, 0.1]])
        values = wave_values(waves, coords, 30)
        assert np.array_equal(values[0], values[1])
        assert not np.array_equal(values[0], values[2])

    def test_spatial_correlation_decays_with_distance(self):
        ds = gen_synthetic(30, 800, noise_std=0.0, seed=1)
        d = ds.geometry.distance_matrix().values
        iu = np.triu_indices(30, k=1)
        corr = np.corrcoef(ds.signals.values)[iu]
        dist = d[iu]
        order = np.argsort(dist)
        q = len(order) // 4
        nearest = corr[order[:q]].mean()
        farthest = corr[order[-q:]].mean()
        assert nearest > farthest

    def test_validation(self):
        with pytest.raises(ParameterError):
            gen_synthetic(3, 50)
        with pytest.raises(ParameterError):
            gen_synthetic(8, 1)
        with pytest.raises(ParameterError):
            gen_synthetic(8, 50, noise_std=-0.1)


class TestSplit:
    def test_quarter_of_eight_is_two(self):
        ds = gen_synthetic(8, 40, seed=2)
        parts = split(ds, SplitSpec(unsampled_fraction=0.25, seed=0))
        assert len(parts.unsampled) == 2
        assert len(parts.observed) == 6

    def test_same_seed_same_split(self):
        ds = gen_synthetic(12, 40, seed=2)
        a = split(ds, SplitSpec(seed=5))
        b = split(ds, SplitSpec(seed=5))
        assert np.array_equal(a.unsampled, b.unsampled)
        assert a.train_end == b.train_end

    def test_partition_is_disjoint_and_complete(self):
        ds = gen_synthetic(11, 40, seed=3)
        parts = split(ds, SplitSpec(seed=1))
        merged = np.sort(np.concatenate([parts.observed, parts.unsampled]))
        assert np.array_equal(merged, np.arange(11))

    def test_training_data_never_contains_unsampled_rows(self):
        ds = gen_synthetic(10, 60, seed=4)
        parts = split(ds, SplitSpec(seed=2))
        expected = ds.signals.values[parts.observed][:, : parts.train_end]
        assert np.array_equal(parts.train.values, expected)
        assert parts.train.n == len(parts.observed)

    def test_time_split_fraction(self):
        ds = gen_synthetic(8, 100, seed=5)
        parts = split(ds, SplitSpec(train_fraction=0.7, seed=0))
        assert parts.train_end == 70
        assert parts.test.p == 30

    def test_too_few_sensors(self):
        ds = gen_synthetic(4, 40, seed=6)
        with pytest.raises(ParameterError):
            split(ds, SplitSpec(unsampled_fraction=0.9, seed=0))

    def test_fraction_bounds(self):
        with pytest.raises(ParameterError):
            SplitSpec(train_fraction=1.0)
        with pytest.raises(ParameterError):
            SplitSpec(unsampled_fraction=0.0)


class TestCsvRoundTrip:
    def test_signals_and_coords_round_trip_exactly(self, tmp_path):
        ds = gen_synthetic(6, 20, seed=8)
        ds.comments = ["rng: numpy default_rng (PCG64), seed=8"]
        obs = ds.signals.observed.copy()
        obs[2, 5] = False
        vals = ds.signals.values.copy()
        vals[2, 5] = 0.0
        ds = Dataset(ds.name, SignalMatrix(vals, obs), ds.geometry, ds.sensor_ids, ds.comments)
        sp, gp = tmp_path / "signals.csv", tmp_path / "geometry.csv"
        save_csv(ds, sp, gp)
        back = load_csv(sp, gp)
        assert np.array_equal(back.signals.values, ds.signals.values)
        assert np.array_equal(back.signals.observed, ds.signals.observed)
        assert np.array_equal(back.geometry.coords, ds.geometry.coords)
        assert back.comments == ds.comments
        assert not back.signals.observed[2, 5]

    def test_distance_matrix_round_trip(self, tmp_path):
        d = DistanceMatrix(np.array([[0.0, 1.5], [1.5, 0.0]]))
        ds = Dataset("pair", SignalMatrix(np.ones((2, 3)), np.ones((2, 3), dtype=bool)), Geometry(distances=d))
        sp, gp = tmp_path / "s.csv", tmp_path / "g.csv"
        save_csv(ds, sp, gp)
        back = load_csv(sp, gp)
        assert back.geometry.kind == "distance"
        assert np.array_equal(back.geometry.distances.values, d.values)

    def test_edge_list_round_trip(self, tmp_path):
        ds = Dataset(
            "ring",
            SignalMatrix(np.ones((3, 4)), np.ones((3, 4), dtype=bool)),
            Geometry(edges=[(0, 1), (1, 2)]),
        )
        sp, gp = tmp_path / "s.csv", tmp_path / "g.csv"
        save_csv(ds, sp, gp)
        back = load_csv(sp, gp)
        assert back.geometry.kind == "edges"
        assert back.geometry.edges == [(0, 1), (1, 2)]

    def test_lonlat_header_round_trips_metric(self, tmp_path):
        geo = Geometry(coords=np.array([[10.0, 50.0], [11.0, 51.0]]), metric="haversine_km")
        ds = Dataset("geo", SignalMatrix(np.ones((2, 3)), np.ones((2, 3), dtype=bool)), geo)
        sp, gp = tmp_path / "s.csv", tmp_path / "g.csv"
        save_csv(ds, sp, gp)
        back = load_csv(sp, gp)
        assert back.geometry.metric == "haversine_km"


class TestIngestionErrors:
    def write(self, tmp_path, signal_text, geometry_text="sensor_id,x,y\ns0,0.0,0.0\ns1,1.0,1.0\n"):
        sp = tmp_path / "signals.csv"
        gp = tmp_path / "geometry.csv"
        sp.write_text(signal_text)
        gp.write_text(geometry_text)
        return sp, gp

    def test_ragged_row_reports_line(self, tmp_path):
        sp, gp = self.write(tmp_path, "sensor_id,t0,t1\ns0,1.0,2.0\ns1,3.0\n")
        with pytest.raises(IngestionError) as exc:
            load_csv(sp, gp)
        assert "line 3" in str(exc.value)

    def test_non_numeric_cell(self, tmp_path):
        sp, gp = self.write(tmp_path, "sensor_id,t0,t1\ns0,1.0,abc\ns1,3.0,4.0\n")
        with pytest.raises(IngestionError):
            load_csv(sp, gp)

    def test_nan_cell_rejected(self, tmp_path):
        sp, gp = self.write(tmp_path, "sensor_id,t0,t1\ns0,1.0,nan\ns1,3.0,4.0\n")
        with pytest.raises(IngestionError):
            load_csv(sp, gp)

    def test_geometry_count_mismatch(self, tmp_path):
        sp, gp = self.write(
            tmp_path,
            "sensor_id,t0,t1\ns0,1.0,2.0\ns1,3.0,4.0\ns2,5.0,6.0\n",
        )
        with pytest.raises(IngestionError):
            load_csv(sp, gp)

    def test_negative_distance(self, tmp_path):
        sp = tmp_path / "signals.csv"
        sp.write_text("sensor_id,t0,t1\ns0,1.0,2.0\ns1,3.0,4.0\n")
        gp = tmp_path / "geometry.csv"
        gp.write_text("0.0,-1.0\n-1.0,0.0\n")
        with pytest.raises(IngestionError):
            load_csv(sp, gp)

    def test_geometry_id_order_must_match(self, tmp_path):
        sp, gp = self.write(
            tmp_path,
            "sensor_id,t0,t1\ns0,1.0,2.0\ns1,3.0,4.0\n",
            "sensor_id,x,y\ns1,0.0,0.0\ns0,1.0,1.0\n",
        )
        with pytest.raises(IngestionError):
            load_csv(sp, gp)

    def test_empty_signal_file(self, tmp_path):
        sp = tmp_path / "signals.csv"
        sp.write_text("# nothing here\n")
        with pytest.raises(IngestionError):
            load_signals(sp)

    def test_edge_out_of_range(self, tmp_path):
        gp = tmp_path / "geometry.csv"
        gp.write_text("i,j\n0,5\n")
        with pytest.raises(IngestionError):
            load_geometry(gp, 3)


class TestMissingSentinel:
    def test_empty_cell_default(self, tmp_path):
        sp = tmp_path / "signals.csv"
        sp.write_text("sensor_id,t0,t1,t2\ns0,1.0,,3.0\n")
        ids, signals, _ = load_signals(sp)
        assert not signals.observed[0, 1]
        assert signals.values[0, 1] == 0.0

    def test_numeric_sentinel(self, tmp_path):
        sp = tmp_path / "signals.csv"
        sp.write_text("sensor_id,t0,t1,t2\ns0,1.0,-999,3.0\n")
        _, signals, _ = load_signals(sp, missing_sentinel="-999")
        assert not signals.observed[0, 1]
        assert signals.observed[0, 0]

    def test_sentinel_matches_equal_floats(self, tmp_path):
        sp = tmp_path / "signals.csv"
        sp.write_text("sensor_id,t0,t1\ns0,0.0,2.0\n")
        _, signals, _ = load_signals(sp, missing_sentinel="0")
        assert not signals.observed[0, 0]


class TestBuildAdjacency:
    def test_gaussian_default(self):
        ds = gen_synthetic(8, 30, seed=9)
        w, info = build_adjacency(ds)
        assert w.kind == "gaussian"
        assert info["sigma"] > 0
        assert np.all(np.diag(w.values) == 1.0)

    def test_binary_median_threshold(self):
        ds = gen_synthetic(8, 30, seed=10)
        w, info = build_adjacency(ds, kind="binary")
        assert w.kind == "binary"
        assert np.all(np.diag(w.values) == 0.0)
        assert np.array_equal(w.values, w.values.T)
        # median threshold links about half of the pairs
        frac = w.values[np.triu_indices(8, k=1)].mean()
        assert 0.3 <= frac <= 0.7

    def test_edges_geometry_forces_binary(self):
        ds = Dataset(
            "ring",
            SignalMatrix(np.ones((3, 4)), np.ones((3, 4), dtype=bool)),
            Geometry(edges=[(0, 1)]),
        )
        w, info = build_adjacency(ds)
        assert info["adjacency"] == "binary"
        with pytest.raises(ParameterError):
            build_adjacency(ds, kind="gaussian")

    def test_explicit_sigma_respected(self):
        ds = gen_synthetic(6, 30, seed=11)
        w, info = build_adjacency(ds, sigma=0.5)
        assert info["sigma"] == 0.5


def test_geometry_one_of_enforced():
    with pytest.raises(ParameterError):
        Geometry()
    with pytest.raises(ParameterError):
        Geometry(coords=np.zeros((2, 2)), edges=[(0, 1)])


def test_period_and_units_round_trip(tmp_path):
    ds = gen_synthetic(5, 12, seed=12)
    ds.period = "5 min"
    ds.units = "mph"
    sp, gp = tmp_path / "s.csv", tmp_path / "g.csv"
    save_csv(ds, sp, gp)
    back = load_csv(sp, gp)
    assert back.period == "5 min"
    assert back.units == "mph"
