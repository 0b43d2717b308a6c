import numpy as np
import pytest

from steerkit.errors import ContractError, DimensionError
from steerkit.models import (
    CrossModalEncoderLayer,
    LSTMCellParams,
    ModelConfig,
    ResidualBackbone,
    ResidualBlock,
    build_model,
    load_checkpoint,
    lstm_cell,
    save_checkpoint,
)
from steerkit.models.dave2 import CONV_PLAN, shape_plan
from steerkit.tensor import Tensor, grad_check


def mini_config(kind, **overrides):
    base = dict(kind=kind, seq_len=2, feature_dim=8, heads=2, encoder_layers=2,
                ff_dim=16, fused_dim=4, lstm_hidden=6, lstm_layers=2,
                backbone_channels=(4,), predict_speed=(kind == "dual_transformer"),
                image_h=8, image_w=8)
    base.update(overrides)
    return ModelConfig(**base)


def rand_seq(seed, b=2, length=2, h=8, w=8):
    return Tensor(np.random.default_rng(seed).uniform(size=(b, length, 3, h, w)))


class TestModelConfig:
    def test_feature_dim_divisibility_enforced(self):
        with pytest.raises(ContractError):
            mini_config("dual_transformer", feature_dim=9)

    def test_simple_transformer_rejects_speed(self):
        with pytest.raises(ContractError):
            mini_config("simple_transformer", predict_speed=True)

    def test_canonical_is_stable(self):
        a = mini_config("dual_transformer")
        b = mini_config("dual_transformer")
        assert a.canonical() == b.canonical()
        assert a.digest() == b.digest()
        assert a.digest() != mini_config("dual_transformer", heads=1).digest()


class TestDave2:
    def test_shape_audit(self):
        rows = shape_plan()
        assert [r.get("channels") for r in rows[:-1]] == [24, 36, 48, 64, 64]
        heights = [r["h"] for r in rows[:-1]]
        widths = [r["w"] for r in rows[:-1]]
        assert heights == [31, 14, 5, 3, 1]
        assert widths == [98, 47, 22, 20, 18]
        assert rows[-1]["flatten"] == 1152

    def test_zero_weights_zero_output(self):
        model = build_model(ModelConfig(kind="dave2", seq_len=1, predict_speed=False), seed=0)
        for t in model.parameters().values():
            t.data[:] = 0.0
        out = model.forward(rand_seq(0, b=2, length=1, h=120, w=320))
        assert np.all(out.angle.data == 0.0)

    def test_batched_shape_contract(self):
        model = build_model(ModelConfig(kind="dave2", seq_len=1, predict_speed=False), seed=0)
        out = model.forward(rand_seq(1, b=3, length=1, h=120, w=320))
        assert out.angle.shape == (3, 1)
        assert np.all(np.isfinite(out.angle.data))

    def test_wrong_input_size_rejected(self):
        model = build_model(ModelConfig(kind="dave2", seq_len=1, predict_speed=False), seed=0)
        with pytest.raises(DimensionError):
            model.forward(rand_seq(2, b=1, length=1, h=100, w=300))

    def test_conv_plan_matches_contract(self):
        assert CONV_PLAN[:3] == ((24, 5, 2), (36, 5, 2), (48, 5, 2))
        assert CONV_PLAN[3:] == ((64, 3, 1), (64, 3, 1))


class TestResidualBackbone:
    def test_zero_head_zero_features(self):
        rng = np.random.default_rng(0)
        bb = ResidualBackbone(rng, (4, 8), feature_dim=16)
        bb.head.w.data[:] = 0.0
        bb.head.b.data[:] = 0.0
        out = bb(Tensor(np.random.default_rng(1).uniform(size=(2, 3, 16, 16))))
        assert np.all(out.data == 0.0)

    @pytest.mark.parametrize("hw", [(32, 32), (48, 64), (64, 40)])
    def test_feature_length_independent_of_input_size(self, hw):
        rng = np.random.default_rng(0)
        bb = ResidualBackbone(rng, (4, 8), feature_dim=12)
        out = bb(Tensor(np.random.default_rng(2).uniform(size=(1, 3) + hw)))
        assert out.shape == (1, 12)

    def test_skip_path_with_zero_convs(self):
        rng = np.random.default_rng(0)
        block = ResidualBlock(rng, 3)
        for t in block.parameters().values():
            t.data[:] = 0.0
        x = Tensor(np.random.default_rng(3).normal(size=(1, 3, 6, 6)))
        out = block(x)
        assert np.array_equal(out.data, np.maximum(x.data, 0.0))

    def test_tiny_input_rejected(self):
        rng = np.random.default_rng(0)
        bb = ResidualBackbone(rng, (4,), feature_dim=8)
        with pytest.raises(DimensionError):
            bb(Tensor(np.zeros((1, 3, 4, 4))))


class TestLSTMCell:
    def test_zero_everything(self):
        rng = np.random.default_rng(0)
        p = LSTMCellParams(rng, 4, 3)
        for t in p.parameters().values():
            t.data[:] = 0.0
        h, c = lstm_cell(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 3))), p)
        assert np.all(h.data == 0.0) and np.all(c.data == 0.0)

    def test_gate_semantics_memory_carry(self):
        rng = np.random.default_rng(0)
        p = LSTMCellParams(rng, 4, 3)
        for t in (p.wx, p.wh):
            t.data[:] = 0.0
        # bias drives gates: input gate hard off, forget gate hard on
        p.b.data[:] = 0.0
        p.b.data[0:3] = -500.0
        p.b.data[3:6] = 500.0
        c0 = np.array([[0.3, -0.7, 1.1]])
        h, c = lstm_cell(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 3))), Tensor(c0), p)
        assert np.allclose(c.data, c0, atol=1e-15)

    def test_against_equation_oracle(self):
        rng = np.random.default_rng(1)
        p = LSTMCellParams(rng, 5, 4)
        x = rng.normal(size=(3, 5))
        h0 = rng.normal(size=(3, 4))
        c0 = rng.normal(size=(3, 4))
        h, c = lstm_cell(Tensor(x), Tensor(h0), Tensor(c0), p)

        def sigmoid(a):
            return 1.0 / (1.0 + np.exp(-a))

        gates = x @ p.wx.data + h0 @ p.wh.data + p.b.data
        i, f, g, o = gates[:, 0:4], gates[:, 4:8], gates[:, 8:12], gates[:, 12:16]
        c_ref = sigmoid(f) * c0 + sigmoid(i) * np.tanh(g)
        h_ref = sigmoid(o) * np.tanh(c_ref)
        assert np.max(np.abs(c.data - c_ref)) < 1e-12
        assert np.max(np.abs(h.data - h_ref)) < 1e-12

    def test_gradient(self):
        rng = np.random.default_rng(2)
        p = LSTMCellParams(rng, 3, 3)
        x = Tensor(rng.normal(size=(2, 3)))
        h0 = Tensor(rng.normal(size=(2, 3)))
        c0 = Tensor(rng.normal(size=(2, 3)))

        def f(wx):
            probe = LSTMCellParams(np.random.default_rng(0), 3, 3)
            probe.wx = wx
            probe.wh = p.wh
            probe.b = p.b
            h, c = lstm_cell(x, h0, c0, probe)
            return (h * h).sum() + (c * c).sum()

        assert grad_check(f, p.wx) < 1e-6


class TestCnnLstm:
    def test_output_shape_and_zero_head(self):
        model = build_model(mini_config("cnn_lstm", predict_speed=False, seq_len=3), seed=0)
        model.out.w.data[:] = 0.0
        model.out.b.data[:] = 0.0
        out = model.forward(rand_seq(3, b=2, length=3))
        assert out.angle.shape == (2, 3)
        assert np.all(out.angle.data == 0.0)

    def test_causality(self):
        model = build_model(mini_config("cnn_lstm", predict_speed=False, seq_len=4), seed=1)
        base = np.random.default_rng(4).uniform(size=(1, 4, 3, 8, 8))
        out0 = model.forward(Tensor(base)).angle.data.copy()
        for t in range(4):
            bumped = base.copy()
            bumped[0, t] = np.clip(bumped[0, t] + 0.25, 0, 1)
            out1 = model.forward(Tensor(bumped)).angle.data
            assert np.array_equal(out1[0, :t], out0[0, :t])
            assert not np.array_equal(out1[0, t:], out0[0, t:])


class TestCrossModalEncoderLayer:
    def make_layer(self, dim=8, heads=2, ff=16, seed=0):
        return CrossModalEncoderLayer(np.random.default_rng(seed), dim, heads, ff)

    def test_single_position_attention_is_one(self):
        layer = self.make_layer()
        rng = np.random.default_rng(5)
        rgb = Tensor(rng.normal(size=(1, 1, 8)))
        flow = Tensor(rng.normal(size=(1, 1, 8)))
        _, _, attn_rgb, attn_flow = layer(rgb, flow)
        assert np.array_equal(attn_rgb.data, np.ones((1, 2, 1, 1)))
        assert np.array_equal(attn_flow.data, np.ones((1, 2, 1, 1)))

    def test_identical_rgb_positions_give_uniform_rows(self):
        layer = self.make_layer(seed=1)
        rng = np.random.default_rng(6)
        one = rng.normal(size=8)
        rgb = Tensor(np.tile(one, (1, 5, 1)))
        flow = Tensor(rng.normal(size=(1, 5, 8)))
        _, _, attn_rgb, attn_flow = layer(rgb, flow)
        assert np.max(np.abs(attn_rgb.data - 0.2)) < 1e-12
        assert np.max(np.abs(attn_flow.data - 0.2)) < 1e-12

    def test_flow_values_cannot_move_flow_attention(self):
        layer = self.make_layer(seed=2)
        rng = np.random.default_rng(7)
        rgb = Tensor(rng.normal(size=(2, 4, 8)))
        flow = Tensor(rng.normal(size=(2, 4, 8)))
        _, _, _, attn0 = layer(rgb, flow)
        for trial in range(5):
            other = Tensor(np.random.default_rng(100 + trial).normal(size=(2, 4, 8)) * 10.0)
            _, _, _, attn1 = layer(rgb, other)
            assert attn0.data.tobytes() == attn1.data.tobytes()

    def test_rows_sum_to_one(self):
        layer = self.make_layer(seed=3)
        rng = np.random.default_rng(8)
        _, _, attn_rgb, attn_flow = layer(Tensor(rng.normal(size=(1, 6, 8))),
                                          Tensor(rng.normal(size=(1, 6, 8))))
        for attn in (attn_rgb, attn_flow):
            assert np.max(np.abs(attn.data.sum(-1) - 1.0)) < 1e-9
            assert np.all(attn.data >= 0.0)

    def test_gradient(self):
        layer = self.make_layer(dim=4, heads=2, ff=8, seed=4)
        rng = np.random.default_rng(9)
        flow = Tensor(rng.normal(size=(1, 3, 4)))
        rgb0 = Tensor(rng.normal(size=(1, 3, 4)))

        def f(rgb):
            r, fl, _, _ = layer(rgb, flow)
            return (r * r).sum() + (fl * fl).sum()

        assert grad_check(f, rgb0) < 1e-4


class TestTransformers:
    def test_dual_zero_heads_zero_outputs(self):
        model = build_model(mini_config("dual_transformer"), seed=0)
        for head in (model.angle_head, model.speed_head):
            head.w.data[:] = 0.0
            head.b.data[:] = 0.0
        out = model.forward(rand_seq(10), rand_seq(11))
        assert np.all(out.angle.data == 0.0)
        assert np.all(out.speed.data == 0.0)

    def test_dual_output_shapes(self):
        cfg = mini_config("dual_transformer")
        model = build_model(cfg, seed=0)
        out = model.forward(rand_seq(12, b=3), rand_seq(13, b=3))
        assert out.angle.shape == (3, 2)
        assert out.speed.shape == (3, 2)
        assert len(out.attention) == cfg.encoder_layers
        for entry in out.attention:
            assert set(entry) == {"rgb", "flow"}
            assert entry["rgb"].shape == (3, cfg.heads, 2, 2)
            assert entry["flow"].shape == (3, cfg.heads, 2, 2)

    def test_simple_rejects_flow(self):
        model = build_model(mini_config("simple_transformer"), seed=0)
        with pytest.raises(ContractError):
            model.forward(rand_seq(14), rand_seq(15))

    def test_simple_has_fewer_parameters(self):
        dual = build_model(mini_config("dual_transformer"), seed=0)
        simple = build_model(mini_config("simple_transformer"), seed=0)
        assert simple.num_parameters() < dual.num_parameters()

    def test_weight_surgery_equivalence(self):
        cfg_dual = mini_config("dual_transformer")
        cfg_simple = mini_config("simple_transformer")
        dual = build_model(cfg_dual, seed=0)
        simple = build_model(cfg_simple, seed=1)
        d = cfg_dual.feature_dim

        simple.backbone_rgb.load_state(dual.backbone_rgb.state())
        for branch, layer in zip(simple.layers, dual.layers):
            branch.load_state(layer.rgb.state())
        # fuse: keep the rgb half, null out the flow half
        simple.fuse.w.data = dual.fuse.w.data[:d].copy()
        simple.fuse.b.data = dual.fuse.b.data.copy()
        dual.fuse.w.data[d:] = 0.0
        simple.reduce.load_state(dual.reduce.state())
        simple.angle_head.load_state(dual.angle_head.state())

        rgb = rand_seq(16)
        flow = rand_seq(17)
        a = dual.forward(rgb, flow).angle.data
        b = simple.forward(rgb).angle.data
        assert np.max(np.abs(a - b)) < 1e-9

    def test_batch_permutation_equivariance(self):
        model = build_model(mini_config("dual_transformer"), seed=0)
        rgb = rand_seq(18, b=4)
        flow = rand_seq(19, b=4)
        out = model.forward(rgb, flow).angle.data
        perm = [2, 0, 3, 1]
        out_p = model.forward(Tensor(rgb.data[perm]), Tensor(flow.data[perm])).angle.data
        assert np.allclose(out_p, out[perm], atol=1e-12)

    def test_forward_deterministic(self):
        model = build_model(mini_config("dual_transformer"), seed=0)
        rgb, flow = rand_seq(20), rand_seq(21)
        a = model.forward(rgb, flow).angle.data
        b = model.forward(rgb, flow).angle.data
        assert a.tobytes() == b.tobytes()

    def test_sequence_length_enforced(self):
        model = build_model(mini_config("dual_transformer", seq_len=3), seed=0)
        with pytest.raises(DimensionError):
            model.forward(rand_seq(22, length=2), rand_seq(23, length=2))


class TestCheckpoint:
    def test_roundtrip_reproduces_outputs(self, tmp_path):
        cfg = mini_config("dual_transformer")
        model = build_model(cfg, seed=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model.state(), cfg.digest())

        arrays, digest = load_checkpoint(path)
        assert digest == cfg.digest()
        clone = build_model(cfg, seed=99)
        clone.load_state(arrays)
        rgb, flow = rand_seq(24), rand_seq(25)
        a = model.forward(rgb, flow).angle.data
        b = clone.forward(rgb, flow).angle.data
        assert a.tobytes() == b.tobytes()

    def test_truncated_file_rejected(self, tmp_path):
        cfg = mini_config("simple_transformer")
        model = build_model(cfg, seed=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model.state(), cfg.digest())
        path.write_bytes(path.read_bytes()[:-20])
        from steerkit.errors import CheckpointError
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_save_is_deterministic(self, tmp_path):
        cfg = mini_config("simple_transformer")
        model = build_model(cfg, seed=0)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, model.state(), cfg.digest())
        save_checkpoint(p2, model.state(), cfg.digest())
        assert p1.read_bytes() == p2.read_bytes()
