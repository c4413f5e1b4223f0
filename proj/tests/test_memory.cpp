#include "car/memory.hpp"

#include "test_util.hpp"

using namespace testutil;
using A = ArtifactType;

namespace {

MemoryStore filled() {
    MemoryStore m;
    m = m.append({0, A::image, 0, "scene.png", {}});
    m = m.append({1, A::description, 0, {{"objects", json::array()}}, {}});
    m = m.append({2, A::graph, 0, {{"edges", json::array()}}, {}});
    m = m.append({2, A::sidecar, 0, {{"entries", json::array()}}, {}});
    m = m.append({3, A::layout_program, 0, {{"v", 0}}, {}});
    m = m.append({3, A::critique, 1, {{"score", 6}}, {}});
    m = m.append({3, A::layout_program, 1, {{"v", 1}}, {}});
    m = m.append({4, A::layout_program, 0, {{"v", 4}}, {}});
    return m;
}

}  // namespace

TEST(Memory, AppendIsPersistent) {
    const MemoryStore a = filled();
    const MemoryStore b = a.append({5, A::profile_set, 0, json::object(), {}});
    EXPECT_EQ(a.size(), 8u);
    EXPECT_EQ(b.size(), 9u);
    EXPECT_THROW((void)a.append({1, A::description, 0, {}, {}}), ConflictError);
}

TEST(Memory, ViewsFollowTable) {
    const MemoryStore m = filled();
    for (const auto& [stage, allowed] : default_view_table())
        for (const auto& e : m.view(stage)) EXPECT_TRUE(allowed.count({e.stage, e.artifact_type})) << stage;
    const auto v5 = m.view(5);
    EXPECT_EQ(pick(v5, A::layout_program)->payload.at("v"), 4);
    EXPECT_EQ(pick(m.view(4), A::layout_program)->payload.at("v"), 1);  // latest stage 3 iteration
    EXPECT_EQ(pick(v5, A::critique), nullptr);
    EXPECT_THROW((void)m.view(7), ConfigError);
}

TEST(Memory, AblatedViewIsSmaller) {
    const MemoryStore m = filled();
    const auto v = m.ablated_view(5);
    // Image, the stage 4 program and nothing older.
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].artifact_type, A::image);
    EXPECT_EQ(v[1].stage, 4);
    EXPECT_EQ(pick(v, A::description), nullptr);
    for (int stage : {2, 3, 4, 5, 6}) EXPECT_LE(m.ablated_view(stage).size(), m.size());
}

TEST(Memory, PersistAndLoad) {
    TempDir dir("memory");
    const MemoryStore m = filled();
    persist(m, dir.path);
    const MemoryStore back = load_memory(dir.path);
    EXPECT_EQ(back, m);
    write_text(dir.path / entry_file_name({1, A::description, 0}), "{");
    EXPECT_THROW(load_memory(dir.path), LoadError);
}
