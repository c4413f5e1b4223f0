#include "car/core_model.hpp"

#include "test_util.hpp"

using namespace testutil;

namespace {

struct Adversarial {
    SceneDescription desc;
    std::vector<GraphEdge> edges;
    std::vector<std::string> expect_drop;  // empty = kept
    json expected_forward;
};

Adversarial load_adversarial() {
    const json j = json::parse(read_text(fixture("graph/adversarial.json")));
    Adversarial a;
    a.desc = description_from_json(j.at("description"));
    for (const auto& e : j.at("edges")) {
        a.edges.push_back({e.at("src"), e.at("dst"), *relation_from_string(e.at("relation").get<std::string>()),
                           Provenance::vlm});
        a.expect_drop.push_back(e.at("expect_drop").is_null() ? "" : e.at("expect_drop").get<std::string>());
    }
    a.expected_forward = j.at("expected_forward");
    return a;
}

// Fixture reason tags to a word the drop message must contain.
std::string reason_word(const std::string& tag) {
    if (tag == "arch pair") return "architectural";
    if (tag == "hierarchy") return "hierarchy";
    return tag;
}

// Independent inverse table.
std::optional<std::string> inverse_name(const std::string& r) {
    static const std::map<std::string, std::string> t = {
        {"parent_of", "child_of"}, {"child_of", "parent_of"}, {"left_of", "right_of"}, {"right_of", "left_of"},
        {"front_of", "behind"},    {"behind", "front_of"},    {"on_top_of", "under"},  {"under", "on_top_of"},
        {"adjacent_to", "adjacent_to"}};
    auto it = t.find(r);
    if (it == t.end()) return std::nullopt;
    return it->second;
}

void expect_one_inverse_each(const SceneGraph& g) {
    for (const auto& e : g.edges) {
        if (e.provenance == Provenance::inverse) continue;
        const auto inv = inverse_name(to_string(e.relation));
        long n = 0;
        for (const auto& x : g.edges)
            if (inv && x.src == e.dst && x.dst == e.src && to_string(x.relation) == *inv && x.provenance == Provenance::inverse) ++n;
        EXPECT_EQ(n, inv ? 1 : 0) << e.src << " " << to_string(e.relation) << " " << e.dst;
    }
    long forward = 0, inverses = 0;
    for (const auto& e : g.edges) {
        if (e.provenance == Provenance::inverse) ++inverses;
        else if (inverse_name(to_string(e.relation))) ++forward;
    }
    EXPECT_EQ(forward, inverses);
}

}  // namespace

TEST(Graph, AdversarialEdgesDroppedWithReasons) {
    const Adversarial a = load_adversarial();
    const Skeleton sk = derive_skeleton(a.desc);
    const GraphCompletion c = complete_graph(sk, a.edges, a.desc);

    std::size_t expected_drops = 0;
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
        const auto& e = a.edges[i];
        auto kept = std::find_if(c.graph.edges.begin(), c.graph.edges.end(), [&](const GraphEdge& x) {
            return x.provenance == Provenance::vlm && x.triple() == e.triple();
        });
        auto dropped = std::find_if(c.dropped.begin(), c.dropped.end(), [&](const DroppedEdge& d) {
            return d.edge.triple() == e.triple() && d.reason.find(reason_word(a.expect_drop[i])) != std::string::npos;
        });
        if (a.expect_drop[i].empty()) {
            EXPECT_NE(kept, c.graph.edges.end()) << "edge " << i << " should be kept";
        } else {
            ++expected_drops;
            EXPECT_NE(dropped, c.dropped.end()) << "edge " << i << " should drop as " << a.expect_drop[i];
        }
    }
    EXPECT_EQ(c.dropped.size(), expected_drops);

    for (const auto& f : a.expected_forward) {
        const GraphEdge want{f[0], f[2], *relation_from_string(f[1].get<std::string>()),
                             *provenance_from_string(f[3].get<std::string>())};
        EXPECT_NE(std::find(c.graph.edges.begin(), c.graph.edges.end(), want), c.graph.edges.end())
            << want.src << " " << f[1] << " " << want.dst;
    }
    EXPECT_EQ(check_graph(c.graph), "");
    expect_one_inverse_each(c.graph);
}

TEST(Graph, RandomProposalsKeepInvariants) {
    const Adversarial a = load_adversarial();
    const Skeleton sk = derive_skeleton(a.desc);
    std::vector<std::string> ids(sk.v_major.begin(), sk.v_major.end());
    ids.insert(ids.end(), sk.v_arch.begin(), sk.v_arch.end());
    ids.push_back("ghost");
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<GraphEdge> edges;
        const int n = static_cast<int>(rng() % 25);
        for (int i = 0; i < n; ++i)
            edges.push_back({ids[rng() % ids.size()], ids[rng() % ids.size()],
                             static_cast<Relation>(rng() % kRelationNames.size()), Provenance::vlm});
        const GraphCompletion c = complete_graph(sk, edges, a.desc);
        ASSERT_EQ(check_graph(c.graph), "") << "trial " << trial;
        expect_one_inverse_each(c.graph);
        for (const auto& e : c.graph.edges) {
            ASSERT_NE(e.src, e.dst);
            ASSERT_FALSE(c.graph.is_arch(e.src) && c.graph.is_arch(e.dst));
        }
        EXPECT_EQ(c.dropped.size() + std::count_if(c.graph.edges.begin(), c.graph.edges.end(),
                                                   [](const GraphEdge& e) { return e.provenance == Provenance::vlm; }),
                  edges.size());
    }
}

TEST(Graph, RoundTripJson) {
    const Adversarial a = load_adversarial();
    const GraphCompletion c = complete_graph(derive_skeleton(a.desc), a.edges, a.desc);
    const SceneGraph back = graph_from_json(to_json(c.graph));
    EXPECT_EQ(back.edges, c.graph.edges);
    EXPECT_EQ(back.nodes.size(), c.graph.nodes.size());
}
