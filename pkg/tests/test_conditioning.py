"""Conditioning stage: pair encoding, pooling, global conditioning, fusion."""

import numpy as np
import pytest
import torch

from helpers import brute_force_attention, gradcheck_module, checkerboard
from conftest import SMALL_ENCODER, random_pair, random_set

from lots.conditioning import (
    ConditioningConfig,
    ConditioningStage,
    PairFormer,
    GlobalConditioning,
    encode_pair,
    encode_global_sketch,
    fuse_multi_level,
    global_condition,
    pair_former,
)
from lots.dataset.sketchops import compose_global_sketch
from lots.encoders import EncoderBundle, EncoderConfig
from lots.errors import ConfigurationError, InvalidInputError
from lots.types import ConditioningSet, LocalizedPair, SketchImage, Variant, expected_rows


def make_stage(latent=16, k=4, seed=3, **cond_kw):
    enc = EncoderBundle(SMALL_ENCODER, latent_dim=latent)
    cfg = ConditioningConfig(latent_dim=latent, pool_tokens=k, seed=seed, **cond_kw)
    return ConditioningStage(cfg, enc)


class TestEncodePair:
    def test_shape_contract_default_dims(self):
        enc = EncoderBundle(EncoderConfig(), latent_dim=256)
        pair = LocalizedPair(sketch=SketchImage.blank(64, 64), text="a vest",
                             token_ids=enc.tokenizer.encode("a vest"))
        emb = encode_pair(pair, enc)
        assert tuple(emb.h_sketch.shape) == (16, 256)  # (64/16)^2 patches
        assert emb.h_text.shape[0] == len(pair.token_ids)
        assert emb.h_text.shape[1] == 256

    def test_identity_projection_returns_encoder_output(self):
        enc = EncoderBundle(SMALL_ENCODER, latent_dim=SMALL_ENCODER.sketch_dim)
        with torch.no_grad():
            enc.proj.W_S.copy_(torch.eye(SMALL_ENCODER.sketch_dim))
        pair = LocalizedPair(sketch=SketchImage.blank(64, 64), text="a vest",
                             token_ids=enc.tokenizer.encode("a vest"))
        emb = encode_pair(pair, enc)
        raw = enc.sketch_tokens(pair.sketch)
        assert torch.equal(emb.h_sketch, raw)

    def test_empty_token_sequence_rejected(self):
        with pytest.raises(InvalidInputError):
            LocalizedPair(sketch=SketchImage.blank(64, 64), text="", token_ids=())

    def test_indivisible_dims_rejected(self):
        enc = EncoderBundle(SMALL_ENCODER, latent_dim=16)
        pair = LocalizedPair(sketch=SketchImage.blank(60, 60), text="a vest",
                             token_ids=enc.tokenizer.encode("a vest"))
        with pytest.raises(InvalidInputError):
            encode_pair(pair, enc)

    def test_projection_dim_mismatch_is_configuration_error(self):
        enc = EncoderBundle(SMALL_ENCODER, latent_dim=16)
        with torch.no_grad():
            bad = torch.zeros(16, SMALL_ENCODER.sketch_dim + 1)
        enc.proj.W_S = torch.nn.Parameter(bad)
        pair = LocalizedPair(sketch=SketchImage.blank(64, 64), text="a vest",
                             token_ids=enc.tokenizer.encode("a vest"))
        with pytest.raises(ConfigurationError):
            encode_pair(pair, enc)

    def test_golden_fingerprint(self):
        # Frozen from a fixed-seed fp64 reference forward of this stack.
        enc = EncoderBundle(SMALL_ENCODER, latent_dim=16).double()
        pair = LocalizedPair(sketch=SketchImage(checkerboard(64)), text="striped shirt",
                             token_ids=enc.tokenizer.encode("striped shirt"))
        emb = encode_pair(pair, enc)
        fp = golden_fingerprint(emb.h_sketch)
        expect = GOLDEN["encode_pair_h_sketch"]
        assert fp["sum"] == pytest.approx(expect["sum"], rel=1e-9)
        np.testing.assert_allclose(fp["first4"], expect["first4"], rtol=1e-9)

    def test_no_dependence_on_other_pairs(self, small_stage):
        rng = np.random.default_rng(0)
        tok = small_stage.encoders.tokenizer
        a = random_pair(rng, tok)
        b = random_pair(rng, tok)
        b2 = random_pair(rng, tok)
        enc = small_stage.encoders
        ea1 = encode_pair(a, enc)
        _ = encode_pair(b, enc)
        ea2 = encode_pair(a, enc)
        _ = encode_pair(b2, enc)
        assert torch.equal(ea1.h_sketch, ea2.h_sketch)
        assert torch.equal(ea1.h_text, ea2.h_text)


class TestPairFormer:
    def test_output_shape_k32_d256(self):
        # k=32 is the baseline pool size; 64 is the documented alternative.
        enc = EncoderBundle(EncoderConfig(), latent_dim=256)
        stage = ConditioningStage(ConditioningConfig(latent_dim=256, pool_tokens=32), enc)
        emb = encode_pair(
            LocalizedPair(sketch=SketchImage.blank(64, 64), text="a red vest striped",
                          token_ids=enc.tokenizer.encode("a red vest striped")),
            enc,
        )
        out = pair_former(emb, stage.pair_former)
        assert tuple(out.tokens.shape) == (32, 256)

    def test_uniform_attention_closed_form(self):
        # Zeroed q/k + identity v/out + no ff/norm/residual: every output row
        # is the mean of all (k + n_s + n_t) input rows.
        d, k = 8, 3
        gen = torch.Generator().manual_seed(0)
        cfg = ConditioningConfig(
            latent_dim=d, pool_tokens=k, pair_former_heads=2,
            pair_former_feed_forward=False, pair_former_pre_norm=False,
            pair_former_residual=False,
        )
        pf = PairFormer(cfg, gen).double()
        layer = pf.layers[0]
        with torch.no_grad():
            layer.attn.to_q.weight.zero_()
            layer.attn.to_k.weight.zero_()
            layer.attn.to_v.weight.copy_(torch.eye(d))
            layer.attn.to_out.weight.copy_(torch.eye(d))
        h_s = torch.randn(5, d, dtype=torch.float64)
        h_t = torch.randn(2, d, dtype=torch.float64)
        from lots.types import PairEmbedding

        out = pf(PairEmbedding(h_sketch=h_s, h_text=h_t))
        stacked = torch.cat([pf.z.double(), h_s, h_t], dim=0)
        expected = stacked.mean(dim=0, keepdim=True).expand(k, d)
        assert torch.allclose(out, expected, atol=1e-12)

    def test_byte_identical_pairs_give_identical_tokens(self, small_stage):
        rng = np.random.default_rng(1)
        pair = random_pair(rng, small_stage.encoders.tokenizer)
        t1 = small_stage.pair_block(pair, 0).tokens
        t2 = small_stage.pair_block(pair, 1).tokens
        assert torch.equal(t1, t2)

    def test_dim_mismatch_raises(self):
        gen = torch.Generator().manual_seed(0)
        pf = PairFormer(ConditioningConfig(latent_dim=8, pool_tokens=2), gen)
        from lots.types import PairEmbedding

        with pytest.raises(ConfigurationError):
            pf(PairEmbedding(h_sketch=torch.zeros(3, 9), h_text=torch.zeros(2, 9)))


class TestGlobalConditioning:
    def test_blank_sketch_shape(self):
        enc = EncoderBundle(EncoderConfig(), latent_dim=256)
        stage = ConditioningStage(ConditioningConfig(latent_dim=256, pool_tokens=32), enc)
        tokens = encode_global_sketch(SketchImage.blank(64, 64), enc, stage.global_cond)
        assert tuple(tokens.shape) == (16, 256)

    def test_zero_projection_gives_zero_tokens(self, small_stage):
        with torch.no_grad():
            small_stage.global_cond.W_g.zero_()
        tokens = encode_global_sketch(SketchImage.blank(64, 64), small_stage.encoders,
                                      small_stage.global_cond)
        assert torch.equal(tokens, torch.zeros_like(tokens))

    def test_union_golden_fingerprint(self):
        enc = EncoderBundle(SMALL_ENCODER, latent_dim=16).double()
        gen = torch.Generator().manual_seed(9)
        gc = GlobalConditioning(16, SMALL_ENCODER.sketch_dim, heads=1, generator=gen).double()
        a = SketchImage(checkerboard(64, 8))
        b = SketchImage(1.0 - checkerboard(64, 16))
        union = compose_global_sketch([a, b])
        fp = golden_fingerprint(encode_global_sketch(union, enc, gc))
        expect = GOLDEN["encode_global_sketch_union"]
        assert fp["sum"] == pytest.approx(expect["sum"], rel=1e-9)
        np.testing.assert_allclose(fp["first4"], expect["first4"], rtol=1e-9)

    def test_single_key_ignores_queries(self):
        gen = torch.Generator().manual_seed(2)
        gc = GlobalConditioning(8, 8, heads=1, generator=gen).double()
        h_g = torch.randn(1, 8, dtype=torch.float64)
        p1 = torch.randn(6, 8, dtype=torch.float64)
        p2 = torch.randn(6, 8, dtype=torch.float64)
        out1 = global_condition(p1, h_g, gc)
        out2 = global_condition(p2, h_g, gc)
        expected = (h_g @ gc.V.double().T) @ gc.out.double().T
        assert torch.allclose(out1, expected.expand(6, 8), atol=1e-12)
        assert torch.allclose(out1, out2, atol=1e-12)

    def test_row_permutation_equivariance(self):
        gen = torch.Generator().manual_seed(3)
        gc = GlobalConditioning(8, 8, heads=2, generator=gen).double()
        P = torch.randn(5, 8, dtype=torch.float64)
        h_g = torch.randn(4, 8, dtype=torch.float64)
        perm = torch.tensor([3, 0, 4, 1, 2])
        out = global_condition(P, h_g, gc)
        out_perm = global_condition(P[perm], h_g, gc)
        assert torch.equal(out[perm], out_perm)

    def test_matches_brute_force_oracle(self):
        gen = torch.Generator().manual_seed(4)
        gc = GlobalConditioning(4, 4, heads=1, generator=gen).double()
        P = torch.randn(2, 4, dtype=torch.float64)  # N=1, k=2, d=4
        h_g = torch.randn(3, 4, dtype=torch.float64)
        ours = global_condition(P, h_g, gc).detach().numpy()
        oracle = brute_force_attention(
            P.numpy(), h_g.numpy(),
            gc.Q.detach().double().numpy(), gc.K.detach().double().numpy(),
            gc.V.detach().double().numpy(), gc.out.detach().double().numpy(), heads=1,
        )
        np.testing.assert_allclose(ours, oracle, atol=1e-12)

    def test_shape_mismatch_raises(self):
        gen = torch.Generator().manual_seed(5)
        gc = GlobalConditioning(8, 8, heads=1, generator=gen)
        with pytest.raises(ConfigurationError):
            gc.condition(torch.zeros(2, 6), torch.zeros(3, 8))


class TestFuseMultiLevel:
    def test_zero_global_is_identity(self):
        P = torch.randn(6, 4)
        fused = fuse_multi_level(P, torch.zeros_like(P), (0, 3, 6))
        assert torch.equal(fused.tokens, P)
        assert fused.pair_boundaries == (0, 3, 6)

    def test_zero_pairs_returns_global(self):
        P_g = torch.randn(6, 4)
        fused = fuse_multi_level(torch.zeros_like(P_g), P_g)
        assert torch.equal(fused.tokens, P_g)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 3))
        b = rng.normal(size=(5, 3))
        fused = fuse_multi_level(torch.from_numpy(a), torch.from_numpy(b))
        expected = np.empty_like(a)
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                expected[i, j] = a[i, j] + b[i, j]
        np.testing.assert_allclose(fused.tokens.numpy(), expected, atol=0)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            fuse_multi_level(torch.zeros(2, 3), torch.zeros(3, 2))


class TestComposeVariants:
    def test_row_count_contract(self):
        enc = EncoderBundle(EncoderConfig(), latent_dim=256)
        stage = ConditioningStage(ConditioningConfig(latent_dim=256, pool_tokens=32), enc)
        rng = np.random.default_rng(11)
        cs = random_set(rng, enc.tokenizer, n_pairs=2)
        assert stage.compose(cs, Variant.LOTS).rows == 64
        assert stage.compose(cs, Variant.CONCAT).rows == 80  # n_g = 16
        assert stage.compose(cs, Variant.POOL).rows == 32
        assert stage.compose(cs, Variant.ATTN).rows == 64

    def test_n1_lots_and_pool_agree_on_rows(self, small_stage):
        rng = np.random.default_rng(12)
        cs = random_set(rng, small_stage.encoders.tokenizer, n_pairs=1)
        assert small_stage.compose(cs, Variant.LOTS).rows == small_stage.compose(cs, Variant.POOL).rows == small_stage.k

    def test_expected_rows_law(self, small_stage):
        rng = np.random.default_rng(13)
        k = small_stage.k
        for n in (1, 2, 4):
            cs = random_set(rng, small_stage.encoders.tokenizer, n_pairs=n)
            n_g = small_stage.encoders.sketch_encoder.token_count(64, 64)
            for v in Variant:
                assert small_stage.compose(cs, v).rows == expected_rows(v, n, k, n_g)

    def test_deleting_a_pair_leaves_other_blocks_bitwise(self, small_stage):
        rng = np.random.default_rng(14)
        tok = small_stage.encoders.tokenizer
        cs3 = random_set(rng, tok, n_pairs=3)
        k = small_stage.k
        P3 = small_stage.concat_pairs(cs3)
        cs2 = ConditioningSet(
            pairs=(cs3.pairs[0], cs3.pairs[2]),
            global_sketch=cs3.global_sketch,
            global_context=cs3.global_context,
            global_context_ids=cs3.global_context_ids,
        )
        P2 = small_stage.concat_pairs(cs2)
        assert torch.equal(P3[:k], P2[:k])
        assert torch.equal(P3[2 * k:3 * k], P2[k:2 * k])

    def test_unsupported_variant(self, small_stage):
        rng = np.random.default_rng(15)
        cs = random_set(rng, small_stage.encoders.tokenizer, n_pairs=1)
        with pytest.raises(ValueError):
            small_stage.compose(cs, "blend")

    def test_empty_pair_list_rejected(self, small_stage):
        with pytest.raises(InvalidInputError):
            ConditioningSet(pairs=(), global_sketch=SketchImage.blank(8, 8),
                            global_context="", global_context_ids=(2,))


class TestInvariants:
    def test_pair_isolation(self, small_stage):
        rng = np.random.default_rng(20)
        tok = small_stage.encoders.tokenizer
        cs = random_set(rng, tok, n_pairs=3)
        k = small_stage.k
        before = small_stage.concat_pairs(cs)
        perturbed = ConditioningSet(
            pairs=(cs.pairs[0], random_pair(rng, tok), cs.pairs[2]),
            global_sketch=cs.global_sketch,
            global_context=cs.global_context,
            global_context_ids=cs.global_context_ids,
        )
        after = small_stage.concat_pairs(perturbed)
        assert torch.equal(before[:k], after[:k])
        assert torch.equal(before[2 * k:], after[2 * k:])
        assert not torch.equal(before[k:2 * k], after[k:2 * k])

    def test_block_permutation_equivariance(self, small_stage):
        rng = np.random.default_rng(21)
        tok = small_stage.encoders.tokenizer
        cs = random_set(rng, tok, n_pairs=4)
        k = small_stage.k
        perm = [2, 0, 3, 1]
        cs_perm = ConditioningSet(
            pairs=tuple(cs.pairs[i] for i in perm),
            global_sketch=cs.global_sketch,
            global_context=cs.global_context,
            global_context_ids=cs.global_context_ids,
        )
        ml = small_stage.compose(cs, Variant.LOTS).tokens
        ml_perm = small_stage.compose(cs_perm, Variant.LOTS).tokens
        for new_idx, old_idx in enumerate(perm):
            assert torch.equal(ml_perm[new_idx * k:(new_idx + 1) * k],
                               ml[old_idx * k:(old_idx + 1) * k])

    def test_union_order_invariance(self, small_stage):
        rng = np.random.default_rng(22)
        sketches = [SketchImage(rng.random((64, 64), dtype=np.float32)) for _ in range(3)]
        import itertools

        outs = []
        for order in itertools.permutations(range(3)):
            union = compose_global_sketch([sketches[i] for i in order])
            outs.append(encode_global_sketch(union, small_stage.encoders,
                                             small_stage.global_cond))
        for other in outs[1:]:
            assert torch.equal(outs[0], other)

    def test_determinism(self, small_stage):
        rng = np.random.default_rng(23)
        cs = random_set(rng, small_stage.encoders.tokenizer, n_pairs=2)
        a = small_stage.compose(cs, Variant.LOTS).tokens
        b = small_stage.compose(cs, Variant.LOTS).tokens
        assert torch.equal(a, b)


class TestGradients:
    def test_pair_former_matches_finite_differences(self):
        d, k = 8, 2
        gen = torch.Generator().manual_seed(31)
        cfg = ConditioningConfig(latent_dim=d, pool_tokens=k, pair_former_heads=2)
        pf = PairFormer(cfg, gen).double()
        h_s = torch.randn(3, d, dtype=torch.float64)
        h_t = torch.randn(2, d, dtype=torch.float64)
        from lots.types import PairEmbedding

        weight = torch.randn(k, d, dtype=torch.float64)

        def loss_fn():
            return (pf(PairEmbedding(h_sketch=h_s, h_text=h_t)) * weight).sum()

        for name, err in gradcheck_module(pf, loss_fn):
            assert err < 1e-4, f"{name}: rel err {err}"

    def test_global_conditioning_matches_finite_differences(self):
        gen = torch.Generator().manual_seed(32)
        gc = GlobalConditioning(4, 6, heads=2, generator=gen).double()
        P = torch.randn(3, 4, dtype=torch.float64)
        sketch_tokens = torch.randn(5, 6, dtype=torch.float64)
        weight = torch.randn(3, 4, dtype=torch.float64)

        def loss_fn():
            h_g = gc.project(sketch_tokens)
            return (gc.condition(P, h_g) * weight).sum()

        for name, err in gradcheck_module(gc, loss_fn):
            assert err < 1e-4, f"{name}: rel err {err}"


def golden_fingerprint(tensor: torch.Tensor) -> dict:
    flat = tensor.detach().double().reshape(-1)
    return {"sum": float(flat.sum()), "first4": [float(v) for v in flat[:4]]}


# Frozen outputs of fixed-seed fp64 reference forwards of this stack.
GOLDEN = {
    "encode_pair_h_sketch": {
        "sum": -1.7776533983146932,
        "first4": [0.07034416391446957, 0.13075415411588853,
                   0.08651063545115184, -0.1329569644323615],
    },
    "encode_global_sketch_union": {
        "sum": 7.367928228357429,
        "first4": [-0.019003813237578274, 0.22387141141828124,
                   -0.029484645091776788, 0.057292988725273865],
    },
}
