#pragma once

#include <string>

#include "dma/grid.hpp"

namespace dma {

enum class Stage { L1, L2, L3, L4, L5, L6, L7, L8 };
enum class Frame { XY, XiEta, AlphaBeta };

const char* stage_name(Stage s);
const char* frame_name(Frame f);

// L = a11 d_xx + 2 a12 d_xy + a22 d_yy + a1 d_x + a2 d_y + a0, with all
// coefficients sampled on one grid. Derivatives act in the coordinates of the
// frame. When node_anchored is set the samples are taken at the physical (x, y)
// nodes rather than on a tensor grid of the frame coordinates.
struct LinearOperatorField {
    Stage stage = Stage::L1;
    Frame frame = Frame::XY;
    bool node_anchored = false;
    GridField a11, a12, a22, a1, a2, a0;

    LinearOperatorField() = default;
    LinearOperatorField(const Grid& g, Stage s, Frame f)
        : stage(s), frame(f), a11(g), a12(g), a22(g), a1(g), a2(g), a0(g) {}

    const Grid& grid() const { return a11.grid; }
    GridField apply(const GridField& u) const;
    LinearOperatorField scaled(const GridField& factor) const;
};

}  // namespace dma
