// Builds a two-object program by hand, corrects it and writes the Blender
// script and preview next to the working directory.
//
//   car_sample_minimal [out_dir]

#include <iostream>

#include "car/codegen.hpp"
#include "car/solver.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "minimal_out";

    car::SceneProgram p;
    p.shell = car::rectangular_shell(4.0, 3.0);

    car::Proxy bed;
    bed.id = "bed";
    bed.category = "bed";
    bed.size = {1.6, 2.0, 0.5};
    bed.pose.position = {1.2, 1.5, 0.0};
    p.statements.push_back(bed);

    car::Proxy desk;  // deliberately overlaps the bed
    desk.id = "desk";
    desk.category = "desk";
    desk.size = {1.2, 0.6, 0.75};
    desk.pose.position = {1.8, 1.2, 0.0};
    p.statements.push_back(desk);

    const auto [fixed, report] = car::correct_placements(p);
    for (const auto& e : report.entries)
        std::cout << e.id << " moved " << e.displacement << " m\n";

    car::EmitOptions opts;
    opts.script_dir = out;
    car::write_text(out / "scene.blend.py", car::emit_blender_script(fixed, opts));
    car::write_preview(car::render_preview(fixed), out / "preview.png", {});
    car::write_text(out / "program.json", car::serialize(fixed));
    std::cout << "wrote " << (out / "scene.blend.py").string() << "\n";
}
