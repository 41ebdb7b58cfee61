#include "eqgraph/model.hpp"

#include "eqgraph/error.hpp"

#include <algorithm>
#include <set>

namespace eqgraph {

bool operator==(const BuildParams& l, const BuildParams& r) {
  const auto& a = l.correspondence;
  const auto& b = r.correspondence;
  return a.e_th == b.e_th && a.max_iters == b.max_iters &&
         a.convergence_eps == b.convergence_eps && a.vicinity_radius == b.vicinity_radius &&
         a.seed_pool == b.seed_pool && l.diameter_threshold == r.diameter_threshold &&
         l.lambda_min == r.lambda_min && l.oversize_factor == r.oversize_factor &&
         l.min_size_fraction == r.min_size_fraction && l.topology == r.topology &&
         l.hub_subject == r.hub_subject;
}

void validate(const BuildParams& params) {
  validate(params.correspondence);
  if (params.diameter_threshold < 1) throw InvalidArgument("diameter threshold must be >= 1");
  if (!(params.lambda_min > 0)) throw InvalidArgument("lambda_min must be positive");
  if (!(params.oversize_factor >= 1)) throw InvalidArgument("oversize_factor must be >= 1");
  if (!(params.min_size_fraction >= 0) || params.min_size_fraction > 1)
    throw InvalidArgument("min_size_fraction must lie in [0, 1]");
  if (params.topology == LinkTopology::hub && params.hub_subject.empty())
    throw InvalidArgument("hub topology needs a hub subject");
}

Model::Model(int dimension, std::vector<Collection> collections, std::vector<EquivalenceSet> sets,
             std::vector<IrLink> ir_links, BuildParams params,
             std::optional<PcaBasis> projection)
    : dimension_(dimension),
      collections_(std::move(collections)),
      sets_(std::move(sets)),
      ir_links_(std::move(ir_links)),
      params_(std::move(params)),
      projection_(std::move(projection)) {
  for (std::size_t c = 0; c < collections_.size(); ++c) {
    const auto& col = collections_[c];
    if (!collection_index_.emplace(col.id, c).second)
      throw BuildError("duplicate collection id " + std::to_string(col.id.value));
    for (std::size_t e = 0; e < col.ensembles.size(); ++e) {
      const auto& ens = col.ensembles[e];
      for (std::size_t i = 0; i < ens.descriptors.size(); ++i) {
        const auto& d = ens.descriptors[i];
        if (d.vector.size() != dimension_)
          throw BuildError("descriptor " + std::to_string(d.id.value) + " has wrong dimension");
        if (!locations_.emplace(d.id, Location{c, e, i}).second)
          throw BuildError("duplicate descriptor id " + std::to_string(d.id.value));
      }
    }
  }

  for (std::size_t s = 0; s < sets_.size(); ++s) {
    const auto& set = sets_[s];
    if (set.id.value != s) throw BuildError("equivalence set ids must be sequential");
    if (!collection_index_.contains(set.collection))
      throw BuildError("set " + std::to_string(s) + " names an unknown collection");
    std::set<EnsembleId> ensembles;
    bool has_bridging = false;
    for (const auto member : set.members) {
      if (!locations_.contains(member))
        throw BuildError("set " + std::to_string(s) + " names an unknown descriptor");
      const auto& d = descriptor(member);
      if (d.collection != set.collection)
        throw BuildError("set " + std::to_string(s) + " spans collections");
      if (!ensembles.insert(d.ensemble).second)
        throw BuildError("set " + std::to_string(s) + " has two members of one ensemble");
      if (!set_index_.emplace(member, s).second)
        throw BuildError("descriptor " + std::to_string(member.value) + " is in two sets");
      has_bridging = has_bridging || member == set.bridging;
    }
    if (!has_bridging) throw BuildError("set " + std::to_string(s) + " bridging is not a member");
    if (!ensemble_of(set.bridging).expression.neutral())
      throw BuildError("set " + std::to_string(s) + " bridging is not neutral");
  }

  for (const auto& link : ir_links_) {
    if (link.a.value >= sets_.size() || link.b.value >= sets_.size())
      throw BuildError("ir link names an unknown set");
    if (sets_[link.a.value].collection == sets_[link.b.value].collection)
      throw BuildError("ir link joins sets of one collection");
    links_.insert(link_key(link.a, link.b));
  }
}

std::uint64_t Model::link_key(SetId a, SetId b) {
  const auto [lo, hi] = std::minmax(a.value, b.value);
  return (lo << 32) | hi;
}

const Descriptor& Model::descriptor(DescriptorId id) const {
  const auto& loc = locations_.at(id);
  return collections_[loc.collection].ensembles[loc.ensemble].descriptors[loc.index];
}

const Ensemble& Model::ensemble_of(DescriptorId id) const {
  const auto& loc = locations_.at(id);
  return collections_[loc.collection].ensembles[loc.ensemble];
}

const Collection& Model::collection(CollectionId id) const {
  return collections_[collection_index_.at(id)];
}

const EquivalenceSet* Model::set_of(DescriptorId id) const {
  const auto it = set_index_.find(id);
  return it == set_index_.end() ? nullptr : &sets_[it->second];
}

bool Model::linked(SetId a, SetId b) const { return links_.contains(link_key(a, b)); }

StarGraph Model::star(SetId id) const {
  const auto& s = set(id);
  StarGraph out{s.id, s.bridging, {}};
  for (const auto m : s.members)
    if (m != s.bridging) out.leaves.push_back(m);
  return out;
}

std::vector<const Descriptor*> Model::descriptors_by_id() const {
  std::vector<const Descriptor*> out;
  out.reserve(locations_.size());
  for (const auto& c : collections_)
    for (const auto& e : c.ensembles)
      for (const auto& d : e.descriptors) out.push_back(&d);
  std::sort(out.begin(), out.end(),
            [](const Descriptor* l, const Descriptor* r) { return l->id < r->id; });
  return out;
}

}  // namespace eqgraph
