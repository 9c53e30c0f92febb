#pragma once

#include "cdapicard/space.hpp"

namespace cdapicard {

/// Velocity (P2 vector), pressure (P1disc, zero mean after a solve) and
/// temperature (P2 scalar) on a common mesh.
struct State {
    Field u;
    Field p;
    Field T;

    [[nodiscard]] bool finite() const { return u.finite() && p.finite() && T.finite(); }
};

}  // namespace cdapicard
