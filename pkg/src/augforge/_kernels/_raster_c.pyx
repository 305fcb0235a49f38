# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled z-buffer triangle rasterization kernel.

Must stay arithmetic-identical to augforge.geometry._raster_py (compiled
with -ffp-contract=off so results match the numpy fallback bit-for-bit).
"""

from libc.math cimport ceil, floor


cdef inline bint _edge_accepts_zero(double px, double py, double qx, double qy) nogil:
    cdef double dx = qx - px
    cdef double dy = qy - py
    return (dy == 0.0 and dx > 0.0) or dy < 0.0


def rasterize_into(double[:, :, ::1] tris, double[:, ::1] zbuf):
    """Rasterize projected (u, v, z) triangles into a min-depth buffer."""
    cdef Py_ssize_t height = zbuf.shape[0]
    cdef Py_ssize_t width = zbuf.shape[1]
    cdef Py_ssize_t t, px, py
    cdef double ax, ay, az, bx, by, bz, cx, cy, cz
    cdef double area, minx, maxx, miny, maxy
    cdef double pcx, pcy, w0, w1, w2, s, depth, tmp
    cdef Py_ssize_t px0, px1, py0, py1
    cdef bint accept0, accept1, accept2, equalz

    with nogil:
        for t in range(tris.shape[0]):
            ax = tris[t, 0, 0]; ay = tris[t, 0, 1]; az = tris[t, 0, 2]
            bx = tris[t, 1, 0]; by = tris[t, 1, 1]; bz = tris[t, 1, 2]
            cx = tris[t, 2, 0]; cy = tris[t, 2, 1]; cz = tris[t, 2, 2]
            area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area == 0.0:
                continue
            if area < 0.0:
                tmp = bx; bx = cx; cx = tmp
                tmp = by; by = cy; cy = tmp
                tmp = bz; bz = cz; cz = tmp
                area = -area

            minx = ax
            if bx < minx: minx = bx
            if cx < minx: minx = cx
            maxx = ax
            if bx > maxx: maxx = bx
            if cx > maxx: maxx = cx
            miny = ay
            if by < miny: miny = by
            if cy < miny: miny = cy
            maxy = ay
            if by > maxy: maxy = by
            if cy > maxy: maxy = cy

            px0 = <Py_ssize_t>ceil(minx - 0.5)
            if px0 < 0: px0 = 0
            px1 = <Py_ssize_t>floor(maxx - 0.5)
            if px1 > width - 1: px1 = width - 1
            py0 = <Py_ssize_t>ceil(miny - 0.5)
            if py0 < 0: py0 = 0
            py1 = <Py_ssize_t>floor(maxy - 0.5)
            if py1 > height - 1: py1 = height - 1
            if px0 > px1 or py0 > py1:
                continue

            accept0 = _edge_accepts_zero(bx, by, cx, cy)
            accept1 = _edge_accepts_zero(cx, cy, ax, ay)
            accept2 = _edge_accepts_zero(ax, ay, bx, by)
            equalz = az == bz and bz == cz

            for py in range(py0, py1 + 1):
                pcy = py + 0.5
                for px in range(px0, px1 + 1):
                    pcx = px + 0.5
                    w0 = (cx - bx) * (pcy - by) - (cy - by) * (pcx - bx)
                    if w0 < 0.0 or (w0 == 0.0 and not accept0):
                        continue
                    w1 = (ax - cx) * (pcy - cy) - (ay - cy) * (pcx - cx)
                    if w1 < 0.0 or (w1 == 0.0 and not accept1):
                        continue
                    w2 = (bx - ax) * (pcy - ay) - (by - ay) * (pcx - ax)
                    if w2 < 0.0 or (w2 == 0.0 and not accept2):
                        continue
                    if equalz:
                        depth = az
                    else:
                        s = w0 / az + w1 / bz + w2 / cz
                        depth = area / s
                    if depth < zbuf[py, px]:
                        zbuf[py, px] = depth
