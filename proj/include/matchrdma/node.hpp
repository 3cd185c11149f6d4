#pragma once

#include <memory>
#include <vector>

#include "matchrdma/event_engine.hpp"
#include "matchrdma/packet.hpp"
#include "matchrdma/port.hpp"

namespace matchrdma {

class Simulation;

enum class NodeKind : std::uint8_t { kServer, kLeaf, kSpine, kOtnEdge };

class Node : public EventTarget {
  public:
    Node(Simulation* sim, NodeId id, NodeKind kind) : sim_(sim), id_(id), kind_(kind) {}

    NodeId id() const { return id_; }
    NodeKind kind() const { return kind_; }
    Simulation* sim() const { return sim_; }

    Port* add_port(NodeId peer, double rate_bps, SimTime prop_ns);
    Port* port_to(NodeId peer);
    const std::vector<std::unique_ptr<Port>>& ports() const { return ports_; }

    struct Upstream {
        Node* node;          // neighbor transmitting toward us
        std::uint32_t port;  // index of their port facing us
        SimTime prop_ns;     // delay of the pause frame back to them
        bool pausable;       // PFC never reaches across the long haul
    };
    std::vector<Upstream> upstreams;

    void on_event(const Event& ev) override;

    virtual void on_packet(const RocePacket& pkt) = 0;
    // Called when one of this node's ports finishes serializing a packet.
    virtual void on_port_tx(const RocePacket& pkt, Port& port) { (void)pkt; (void)port; }
    virtual void on_timer(const Event& ev) { (void)ev; }

    // Emits PAUSE (or RESUME) toward every upstream transmitter. Frames from
    // one emitting queue must strictly alternate; callers own that edge state.
    void emit_pfc_upstream(bool pause);

  protected:
    Simulation* sim_;
    NodeId id_;
    NodeKind kind_;
    std::vector<std::unique_ptr<Port>> ports_;
};

// Leaf and spine switches forward along the connection's static path.
class SwitchNode : public Node {
  public:
    using Node::Node;
    void on_packet(const RocePacket& pkt) override;
};

}  // namespace matchrdma
