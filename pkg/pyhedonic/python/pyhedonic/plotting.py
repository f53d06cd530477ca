"""Static result plots (PNG, Agg backend)"""

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from pyhedonic.sim.experiments import summarize  # noqa: E402

PathLike = Union[str, Path]


def _save(fig, save_path: PathLike) -> Path:
    path = Path(save_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_hourly_energy(metrics: pd.DataFrame, save_path: PathLike) -> Path:
    """Supply, demand and matched energy per hour of one session"""
    fig, ax = plt.subplots(figsize=(10, 4))
    hours = metrics["hour"]
    width = 0.28
    ax.bar(hours - width, metrics["supply_kwh"], width, label="Supply", color="#2ecc71")
    ax.bar(hours, metrics["demand_kwh"], width, label="Demand", color="#e74c3c")
    ax.bar(hours + width, metrics["energy_kwh"], width, label="Matched", color="#3498db")
    ax.set_xlabel("Hour")
    ax.set_ylabel("Energy [kWh]")
    ax.legend(loc="upper right", fontsize=9)
    ax.grid(True, alpha=0.3)
    return _save(fig, save_path)


def plot_social_index(series: pd.DataFrame, save_path: PathLike) -> Path:
    fig, ax = plt.subplots(figsize=(10, 3.5))
    ax.plot(series["hour"], series["social_index"], marker="o", color="#8e44ad")
    ax.axhline(0, color="gray", linewidth=0.8)
    ax.set_xlabel("Hour")
    ax.set_ylabel("Social index")
    ax.grid(True, alpha=0.3)
    return _save(fig, save_path)


def plot_gamma_sweep(table: pd.DataFrame, save_path: PathLike) -> Path:
    """Energy and price dispersion against the mean coalition count of each Γ"""
    means = summarize(table).sort_values("sell_coalitions")
    coalitions = means["sell_coalitions"] + means["buy_coalitions"]
    fig, axes = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
    axes[0].plot(coalitions, means["energy_kwh"], marker="o", color="#3498db")
    axes[0].set_ylabel("Energy transacted [kWh]")
    axes[1].plot(coalitions, means["price_std"], marker="s", color="#e67e22")
    axes[1].set_ylabel("Price std [Gwei]")
    axes[1].set_xlabel("Coalitions per hour")
    for _, row in means.iterrows():
        axes[0].annotate(row["arm"], (row["sell_coalitions"] + row["buy_coalitions"], row["energy_kwh"]), fontsize=8)
    for ax in axes:
        ax.grid(True, alpha=0.3)
    return _save(fig, save_path)


def plot_arms(table: pd.DataFrame, save_path: PathLike, metric: str = "energy_kwh", ylabel: str = "Energy transacted [kWh]") -> Path:
    """Per-arm distribution of one metric over replications"""
    arms = list(dict.fromkeys(table.sort_values("arm_index")["arm"]))
    data = [table.loc[table["arm"] == arm, metric].dropna() for arm in arms]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.boxplot(data)
    ax.set_xticks(range(1, len(arms) + 1), arms)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return _save(fig, save_path)
