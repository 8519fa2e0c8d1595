"""Численное ядро: ядра памяти, сетка, история, шаг по времени, энергия, затухание."""
