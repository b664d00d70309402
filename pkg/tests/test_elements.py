"""Tests for the reference element families"""

import numpy as np
import pytest

from platelimit.elements import HermiteP3, LagrangeP2, get_element, shape_eval
from platelimit.exceptions import InvalidArgumentError

REFERENCE_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize("kind, count", [("p2_lagrange", 6), ("p3_hermite", 10)])
def test_get_element(kind, count):
    family = get_element(kind)
    assert family.kind == kind
    assert family.local_dof_count == count
    assert len(family.local_kinds) == count


def test_get_element_unknown():
    with pytest.raises(InvalidArgumentError, match="unknown element family"):
        get_element("p1_morley")


@pytest.mark.parametrize("lam", [(1 / 3, 1 / 3, 1 / 3), (0.2, 0.5, 0.3), (1.0, 0.0, 0.0)])
def test_p2_partition_of_unity(lam):
    values, gradients, hessians = shape_eval(LagrangeP2(), lam)
    assert values.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(gradients.sum(axis=0), 0.0, atol=1e-13)
    np.testing.assert_allclose(hessians.sum(axis=0), 0.0, atol=1e-12)


def test_p2_nodal_basis():
    """Each P2 shape function is one at its own node and zero at the others"""
    family = LagrangeP2()
    table = np.array([shape_eval(family, node)[0] for node in family.NODES])
    np.testing.assert_allclose(table, np.eye(6), atol=1e-14)


def test_p2_hessians_are_constant():
    family = LagrangeP2()
    _, _, h1 = shape_eval(family, (0.6, 0.2, 0.2))
    _, _, h2 = shape_eval(family, (0.1, 0.1, 0.8))
    np.testing.assert_allclose(h1, h2, atol=1e-12)
    # phi_0 = 2 l0^2 - l0 with l0 = 1 - xi - eta has Hessian [[4, 4], [4, 4]]
    np.testing.assert_allclose(h1[0], [[4.0, 4.0], [4.0, 4.0]])


class TestHermiteBasis:
    """Duality of the cubic Hermite basis with its nodal variables"""

    def test_vertex_values(self):
        family = HermiteP3()
        table = np.array([shape_eval(family, corner)[0] for corner in np.eye(3)])
        expected = np.zeros((3, 10))
        expected[:, :3] = np.eye(3)
        np.testing.assert_allclose(table, expected, atol=1e-14)

    def test_barycentre_value(self):
        values, _, _ = shape_eval(HermiteP3(), (1 / 3, 1 / 3, 1 / 3))
        expected = np.zeros(10)
        expected[3] = 1.0
        np.testing.assert_allclose(values, expected, atol=1e-13)

    @pytest.mark.parametrize("vertex", [0, 1, 2])
    def test_directional_derivatives(self, vertex):
        """grad psi(z_i) . (z_j - z_i) is one for the matching direction only"""
        family = HermiteP3()
        _, gradients, _ = shape_eval(family, np.eye(3)[vertex])
        for j in range(3):
            if j == vertex:
                continue
            direction = REFERENCE_CORNERS[j] - REFERENCE_CORNERS[vertex]
            derivatives = gradients @ direction
            expected = np.zeros(10)
            expected[4 + family.DIRECTIONS.index((vertex, j))] = 1.0
            np.testing.assert_allclose(derivatives, expected, atol=1e-13)

    def test_physical_transform_maps_gradients(self):
        """The physical basis reproduces a linear function from vertex gradients"""
        family = HermiteP3()
        corners = np.array([[[0.2, 0.1], [1.4, 0.3], [0.5, 1.2]]])
        g = np.array([0.7, -1.3])
        local = np.concatenate(
            (corners[0] @ g, [corners[0].mean(axis=0) @ g], np.tile(g, 3))
        )
        lam = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
        values, grads, hessians = family.physical_basis(lam, corners)
        points = lam @ corners[0]
        np.testing.assert_allclose(values[0] @ local, points @ g, atol=1e-12)
        np.testing.assert_allclose(np.einsum("qbd,b->qd", grads[0], local), [g, g], atol=1e-12)
        np.testing.assert_allclose(np.einsum("qbde,b->qde", hessians[0], local), 0.0, atol=1e-11)


@pytest.mark.parametrize(
    "lam",
    [(0.5, 0.5), (0.5, 0.6, -0.1), (0.5, 0.6, 0.1), (np.nan, 0.5, 0.5)],
)
def test_shape_eval_rejects_bad_barycentrics(lam):
    with pytest.raises(InvalidArgumentError):
        shape_eval(LagrangeP2(), lam)
