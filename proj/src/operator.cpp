#include "dma/operator.hpp"

namespace dma {

const char* stage_name(Stage s) {
    static const char* names[] = {"L1", "L2", "L3", "L4", "L5", "L6", "L7", "L8"};
    return names[int(s)];
}

const char* frame_name(Frame f) {
    switch (f) {
        case Frame::XY: return "xy";
        case Frame::XiEta: return "xi-eta";
        case Frame::AlphaBeta: return "alpha-beta";
    }
    return "?";
}

GridField LinearOperatorField::apply(const GridField& u) const {
    GridField r = a11 * dxx(u) + 2.0 * (a12 * dxy(u)) + a22 * dyy(u) + a1 * dx(u) + a2 * dy(u) + a0 * u;
    return r;
}

LinearOperatorField LinearOperatorField::scaled(const GridField& factor) const {
    LinearOperatorField r = *this;
    for (GridField* c : {&r.a11, &r.a12, &r.a22, &r.a1, &r.a2, &r.a0}) *c = *c * factor;
    return r;
}

}  // namespace dma
