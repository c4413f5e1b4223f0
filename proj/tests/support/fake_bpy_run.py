"""Executes an emitted scene script against a stand-in bpy module.

usage: fake_bpy_run.py script.py [script args...]
Exit 0 when the script runs to completion. Prints the number of mesh
objects created.
"""
import runpy
import sys
import types
from unittest import mock


class Anything(mock.MagicMock):
    def _op(self, *a, **k):
        return Anything()

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _op
    __truediv__ = __rtruediv__ = __neg__ = __matmul__ = _op

    def __init__(self, *a, **k):
        super().__init__(*a, **k)
        self.__contains__.return_value = True  # every socket name exists

    def _get_child_mock(self, **kw):
        if str(kw.get("_new_name", "")).startswith("__"):
            return mock.MagicMock(**kw)
        return Anything(**kw)


class Vector(tuple):
    def __new__(cls, v=(0.0, 0.0, 0.0)):
        return super().__new__(cls, v)

    def to_track_quat(self, *a):
        return Anything()

    def normalized(self):
        return self


class Obj(Anything):
    pass


def make_obj(name, kind):
    o = Obj()
    o.name = name
    o.type = kind
    o.data.materials = []
    o.__hash__ = lambda self=o: id(self)
    return o


class Objects(list):
    def new(self, name, data):
        o = make_obj(name, "EMPTY" if data is None else "LIGHT")
        self.append(o)
        return o


def build():
    bpy = Anything(name="bpy")
    objects = Objects()
    bpy.data.objects = objects

    def add_mesh(**_):
        o = make_obj("mesh", "MESH")
        objects.append(o)
        bpy.context.active_object = o
        return {"FINISHED"}

    for prim in ("cube", "cylinder", "uv_sphere", "cone", "plane", "torus"):
        setattr(bpy.ops.mesh, "primitive_%s_add" % prim, add_mesh)
    bpy.ops.wm.obj_import = add_mesh
    bpy.ops.import_scene.gltf = add_mesh
    bpy.ops.wm.ply_import = add_mesh
    bpy.ops.wm.read_factory_settings = lambda **_: objects.clear()
    return bpy, objects


def main():
    bpy, objects = build()
    mathutils = types.ModuleType("mathutils")
    mathutils.Vector = Vector
    mathutils.Euler = lambda v=(0, 0, 0), order="XYZ": tuple(v)
    mathutils.Matrix = Anything()
    sys.modules["bpy"] = bpy
    sys.modules["bmesh"] = Anything(name="bmesh")
    sys.modules["mathutils"] = mathutils
    sys.argv = sys.argv[1:]
    try:
        runpy.run_path(sys.argv[0], run_name="__main__")
    except SystemExit as e:
        if e.code not in (0, None):
            raise
    print(sum(1 for o in objects if o.type == "MESH"))


if __name__ == "__main__":
    main()
