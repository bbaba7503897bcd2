import unittest

import numpy as np

from scoresheet_reader.autodiff import Adam, Parameter, Tape, Tensor, adam_step, clip_grad_norm, ops
from scoresheet_reader.autodiff.gradcheck import (TOLERANCE, GradCheckResult, primitive_cases, raise_on_failure,
                                                 run_cases)
from scoresheet_reader.errors import (BackwardError, ConfigError, DataError, GradientCheckError, NumericError,
                                      OptimizerError, ShapeError)
from scoresheet_reader.model.selfcheck import composed_cases, run_gradcheck_suite


class GradCheckTestCase(unittest.TestCase):

    def test_primitives(self):
        for result in run_cases(primitive_cases(seed=0), points=10, seed=0):
            self.assertLess(result.max_rel_error, TOLERANCE, result.name)
            self.assertGreater(result.checked, 0)

    def test_composed_graphs(self):
        for result in run_cases(composed_cases(seed=0), points=10, seed=0):
            self.assertLess(result.max_rel_error, TOLERANCE, result.name)

    def test_suite_covers_every_primitive(self):
        names = {r.name for r in run_gradcheck_suite(seed=1, points=3)}
        for op in ("matmul", "conv2d", "maxpool2d", "softmax", "embedding_gather", "masked_cross_entropy",
                   "gru_step", "attention", "teacher_forced_loss"):
            self.assertIn(op, names)

    def test_failure_raises(self):
        with self.assertRaises(GradientCheckError):
            raise_on_failure([GradCheckResult("bad", 0.5, 3, False)])
        raise_on_failure([GradCheckResult("good", 1e-8, 3, True)])


class TapeTestCase(unittest.TestCase):

    def test_non_scalar_loss(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with Tape() as tape:
            y = ops.mul(x, x)
        with self.assertRaises(BackwardError):
            tape.backward(y)

    def test_reused_input_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum_all(ops.add(ops.mul(x, x), x))
        tape.backward(loss)
        np.testing.assert_allclose(tape.grad_of(x), [7.0])

    def test_parameter_gradient_and_reset(self):
        p = Parameter(np.array([[1.0, 2.0]]), "p")
        with Tape() as tape:
            loss = ops.sum_all(ops.mul(p, Tensor(np.array([[4.0, 5.0]]))))
        tape.backward(loss)
        np.testing.assert_allclose(p.grad, [[4.0, 5.0]])
        p.zero_grad()
        self.assertFalse(p.grad.any())
        with self.assertRaises(ShapeError):
            p.assign(np.zeros(3))

    def test_nothing_recorded_without_tape(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = ops.tanh(x)
        self.assertFalse(y.requires_grad)
        with Tape() as tape:
            ops.tanh(Tensor(np.ones(3)))
        self.assertEqual(len(tape), 0)


class OpsTestCase(unittest.TestCase):

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
        with self.assertRaises(ShapeError):
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_non_finite_input(self):
        with self.assertRaises(NumericError):
            ops.tanh(Tensor(np.array([1.0, np.nan])))

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        out = ops.softmax(Tensor(rng.normal(scale=20, size=(5, 7)))).value
        np.testing.assert_allclose(out.sum(axis=-1), np.ones(5), rtol=1e-12)
        self.assertTrue((out >= 0).all())

    def test_masked_cross_entropy(self):
        logits = Tensor(np.log(np.array([[[0.5, 0.25, 0.25], [0.1, 0.8, 0.1]]])), requires_grad=True)
        targets = np.array([[0, 2]])
        with Tape() as tape:
            loss = ops.masked_cross_entropy_with_logits(logits, targets, np.array([[1.0, 0.0]]))
        self.assertAlmostEqual(loss.item(), np.log(2.0))
        tape.backward(loss)
        self.assertFalse(tape.grad_of(logits)[0, 1].any())
        with self.assertRaises(DataError):
            ops.masked_cross_entropy_with_logits(logits, targets, np.zeros((1, 2)))

    def test_masked_positions_are_never_read(self):
        rng = np.random.default_rng(2)
        clean = rng.normal(size=(1, 3, 4))
        dirty = clean.copy()
        dirty[0, 2] = np.nan
        mask = np.array([[1.0, 1.0, 0.0]])
        expected = ops.masked_cross_entropy_with_logits(Tensor(clean), np.array([[0, 1, 3]]), mask).item()
        logits = Tensor(dirty, requires_grad=True)
        with Tape() as tape:
            loss = ops.masked_cross_entropy_with_logits(logits, np.array([[0, 1, 99]]), mask)
        self.assertAlmostEqual(loss.item(), expected, places=12)
        tape.backward(loss)
        grad = tape.grad_of(logits)
        self.assertTrue(np.isfinite(grad).all())
        self.assertFalse(grad[0, 2].any())
        with self.assertRaises(NumericError):
            ops.masked_cross_entropy_with_logits(Tensor(dirty), np.array([[0, 1, 3]]), np.ones((1, 3)))

    def test_appended_padding_keeps_the_loss(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(2, 3, 5))
        targets = rng.integers(0, 5, size=(2, 3))
        mask = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
        padded_logits = np.concatenate([logits, rng.normal(size=(2, 4, 5))], axis=1)
        padded_targets = np.concatenate([targets, np.full((2, 4), 2)], axis=1)
        padded_mask = np.concatenate([mask, np.zeros((2, 4))], axis=1)
        short = ops.masked_cross_entropy_with_logits(Tensor(logits), targets, mask).item()
        long = ops.masked_cross_entropy_with_logits(Tensor(padded_logits), padded_targets, padded_mask).item()
        self.assertAlmostEqual(short, long, places=12)

    def test_dropout(self):
        x = Tensor(np.ones((4, 4)))
        self.assertIs(ops.dropout(x, 0.5, train=False), x)
        out = ops.dropout(x, 0.5, train=True, rng=np.random.default_rng(0)).value
        self.assertTrue(set(np.unique(out)) <= {0.0, 2.0})
        with self.assertRaises(ConfigError):
            ops.dropout(x, 1.0, train=True, rng=np.random.default_rng(0))

    def test_dropout_keep_fraction(self):
        rate, n = 0.3, 200000
        out = ops.dropout(Tensor(np.ones(n)), rate, train=True, rng=np.random.default_rng(1)).value
        dropped = float(np.mean(out == 0.0))
        self.assertLess(abs(dropped - rate), 5 * np.sqrt(rate * (1 - rate) / n))
        np.testing.assert_allclose(out[out != 0.0], 1.0 / (1.0 - rate))

    def test_conv_output_shape(self):
        x = Tensor(np.zeros((2, 1, 8, 10)))
        w = Tensor(np.zeros((4, 1, 3, 3)))
        self.assertEqual(ops.conv2d(x, w, Tensor(np.zeros(4))).shape, (2, 4, 6, 8))
        self.assertEqual(ops.maxpool2d(x).shape, (2, 1, 4, 5))


class AdamTestCase(unittest.TestCase):

    def test_first_step_moves_by_learning_rate(self):
        p = Parameter(np.array([1.0, -2.0, 0.5]), "p")
        p.grad[...] = [0.3, -4.0, 2.0]
        adam_step([p], lr=0.01, t=1)
        np.testing.assert_allclose(p.value, [0.99, -1.99, 0.49], atol=1e-6)
        np.testing.assert_allclose(p.grad, [0.3, -4.0, 2.0])

    def test_step_counter_must_be_positive(self):
        p = Parameter(np.zeros(2), "p")
        with self.assertRaises(OptimizerError):
            adam_step([p], lr=0.01, t=0)

    def test_frozen_parameters_are_skipped(self):
        p = Parameter(np.zeros(2), "p")
        p.frozen = True
        p.grad[...] = 1.0
        optimizer = Adam(lr=0.1)
        optimizer.step([p])
        self.assertFalse(p.value.any())
        self.assertFalse(p.adam_m.any())
        self.assertEqual(optimizer.t, 1)

    def test_minimises_a_square(self):
        w = Parameter(np.array([1.0]), "w")
        optimizer = Adam(lr=0.05)
        for _ in range(100):
            w.grad[...] = 2.0 * w.value
            optimizer.step([w])
        self.assertLess(abs(float(w.value[0])), 0.1)

    def test_zero_learning_rate_keeps_parameters(self):
        p = Parameter(np.array([1.0, -2.0]), "p")
        optimizer = Adam(lr=0.0)
        for _ in range(3):
            p.grad[...] = [0.5, -7.0]
            optimizer.step([p])
        np.testing.assert_array_equal(p.value, [1.0, -2.0])

    def test_clip_grad_norm(self):
        a, b = Parameter(np.zeros(1), "a"), Parameter(np.zeros(1), "b")
        a.grad[...] = 3.0
        b.grad[...] = 4.0
        self.assertAlmostEqual(clip_grad_norm([a, b], 1.0), 5.0)
        self.assertAlmostEqual(float(np.hypot(a.grad[0], b.grad[0])), 1.0, places=6)
        self.assertAlmostEqual(clip_grad_norm([a, b], 0.0), 1.0, places=6)


if __name__ == '__main__':
    unittest.main()
