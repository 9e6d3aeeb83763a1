"""Model builders shared by unit and integration tests."""

from isoplate.services import thickness_field as tf
from isoplate.services.laminate import LaminaMaterial, Layup
from isoplate.services.nurbs import rectangle_patch
from isoplate.services.plate_fem import LoadCase, PlateModel, apply_bc

SS1_ALL = [("ss1", ("AD", "BC", "AB", "CD"))]


def make_plate(
    a: float = 10.0,
    h_bar: float = 0.2,
    elements: int = 3,
    angles=(0.0,),
    material: LaminaMaterial | None = None,
    thickness=None,
    load: LoadCase | None = None,
    boundary=None,
    **options,
) -> PlateModel:
    """Square plate; `boundary` is a list of (kind, edges) pairs."""
    patch = rectangle_patch(a, a, elements, elements)
    layup = Layup.from_angles(angles, material or LaminaMaterial.isotropic(3.0e6, 0.25))
    field = tf.fit_field(patch, thickness or tf.uniform(h_bar), layup.n_laminae)
    model = PlateModel(patch=patch, thickness=field, layup=layup, load=load or LoadCase(), **options)
    for kind, edges in boundary or []:
        apply_bc(model, kind, edges)
    return model
